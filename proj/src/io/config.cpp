#include "radmesh/io/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "radmesh/error.hpp"

namespace radmesh::io {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& source, int line, const std::string& what) {
  throw Error(ErrorCode::Format, source + ":" + std::to_string(line) + ": " + what);
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool is_bare_key(const std::string& k) {
  if (k.empty()) return false;
  for (const char c : k) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  }
  return true;
}

class ValueParser {
 public:
  ValueParser(const std::string& text, const std::string& source, int line)
      : s_(text), source_(source), line_(line) {}

  json parse_all() {
    json v = value();
    skip_ws();
    if (pos_ != s_.size()) fail(source_, line_, "unexpected trailing characters");
    return v;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  json value() {
    skip_ws();
    if (pos_ >= s_.size()) fail(source_, line_, "missing value");
    const char c = s_[pos_];
    if (c == '"') return string();
    if (c == '[') return array();
    if (s_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      return true;
    }
    if (s_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      return false;
    }
    return number();
  }

  json string() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) break;
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(source_, line_, std::string("unsupported escape \\") + e);
        }
      }
      out.push_back(c);
    }
    if (pos_ >= s_.size()) fail(source_, line_, "unterminated string");
    ++pos_;
    return out;
  }

  json array() {
    ++pos_;
    json out = json::array();
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return out;
    }
    while (true) {
      out.push_back(value());
      skip_ws();
      if (pos_ >= s_.size()) fail(source_, line_, "unterminated array");
      if (s_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ']') {
          ++pos_;
          return out;
        }
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        return out;
      }
      fail(source_, line_, "expected ',' or ']' in array");
    }
  }

  json number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != ' ' &&
           s_[pos_] != '\t') {
      ++pos_;
    }
    std::string tok;
    for (std::size_t i = start; i < pos_; ++i) {
      if (s_[i] != '_') tok.push_back(s_[i]);
    }
    if (tok.empty()) fail(source_, line_, "missing value");
    const bool is_float = tok.find_first_of(".eE") != std::string::npos || tok == "inf" ||
                          tok == "+inf" || tok == "-inf" || tok == "nan";
    if (!is_float) {
      const char* b = tok.data() + (tok[0] == '+' ? 1 : 0);
      std::int64_t v = 0;
      const auto [p, ec] = std::from_chars(b, tok.data() + tok.size(), v);
      if (ec != std::errc() || p != tok.data() + tok.size()) fail(source_, line_, "invalid value " + tok);
      return v;
    }
    const char* b = tok.data() + (tok[0] == '+' ? 1 : 0);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(b, tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size()) fail(source_, line_, "invalid value " + tok);
    return v;
  }

  const std::string& s_;
  const std::string& source_;
  int line_;
  std::size_t pos_ = 0;
};

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string && c == '\\') {
      ++i;
    } else if (c == '"') {
      in_string = !in_string;
    } else if (c == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

std::vector<std::string> split_dotted(const std::string& s, const std::string& source, int line) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, '.')) {
    part = trim(part);
    if (!is_bare_key(part)) fail(source, line, "invalid key '" + s + "'");
    parts.push_back(part);
  }
  if (parts.empty()) fail(source, line, "empty key");
  return parts;
}

// ---- typed accessors ------------------------------------------------------

using Setter = std::function<void(const json&, const std::string&)>;

[[noreturn]] void type_error(const std::string& key, const char* expected) {
  throw Error(ErrorCode::Format, "config key '" + key + "' must be " + expected);
}

Setter real(double& out) {
  return [&out](const json& v, const std::string& key) {
    if (!v.is_number()) type_error(key, "a number");
    out = v.get<double>();
  };
}

template <class T>
Setter integer(T& out) {
  return [&out](const json& v, const std::string& key) {
    if (!v.is_number_integer()) type_error(key, "an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.get<std::int64_t>() < 0 && !v.is_number_unsigned()) type_error(key, "non-negative");
    }
    out = v.get<T>();
  };
}

Setter boolean(bool& out) {
  return [&out](const json& v, const std::string& key) {
    if (!v.is_boolean()) type_error(key, "true or false");
    out = v.get<bool>();
  };
}

Setter lr_range(optim::LrRange& out) {
  return [&out](const json& v, const std::string& key) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      type_error(key, "an array [initial, final]");
    }
    out.initial = v[0].get<double>();
    out.final = v[1].get<double>();
  };
}

Setter rgb(Vec3& out) {
  return [&out](const json& v, const std::string& key) {
    if (!v.is_array() || v.size() != 3) type_error(key, "an array of three numbers");
    for (const auto& c : v) {
      if (!c.is_number()) type_error(key, "an array of three numbers");
    }
    out = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
  };
}

Setter query_center(field::QueryCenter& out) {
  return [&out](const json& v, const std::string& key) {
    if (!v.is_string()) type_error(key, "\"centroid\" or \"circumcenter\"");
    const std::string s = v.get<std::string>();
    if (s == "centroid") {
      out = field::QueryCenter::Centroid;
    } else if (s == "circumcenter") {
      out = field::QueryCenter::Circumcenter;
    } else {
      type_error(key, "\"centroid\" or \"circumcenter\"");
    }
  };
}

using Table = std::map<std::string, Setter>;

void apply(const json& section, const std::string& name, const Table& table,
           const std::map<std::string, std::function<void(const json&)>>& subsections = {}) {
  if (!section.is_object()) throw Error(ErrorCode::Format, "config section '" + name + "' must be a table");
  for (const auto& [key, value] : section.items()) {
    const std::string full = name + "." + key;
    if (const auto it = table.find(key); it != table.end()) {
      it->second(value, full);
    } else if (const auto sub = subsections.find(key); sub != subsections.end()) {
      sub->second(value);
    } else {
      throw Error(ErrorCode::Format, "unknown config key '" + full + "'");
    }
  }
}

}  // namespace

json parse_toml(const std::string& text, const std::string& source) {
  json root = json::object();
  json* current = &root;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.size() < 3 || s.back() != ']' || s[1] == '[') fail(source, line, "invalid table header");
      current = &root;
      for (const std::string& part : split_dotted(s.substr(1, s.size() - 2), source, line)) {
        json& next = (*current)[part];
        if (next.is_null()) next = json::object();
        if (!next.is_object()) fail(source, line, "'" + part + "' is not a table");
        current = &next;
      }
      continue;
    }
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) fail(source, line, "expected key = value");
    const std::vector<std::string> keys = split_dotted(trim(s.substr(0, eq)), source, line);
    json* target = current;
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
      json& next = (*target)[keys[i]];
      if (next.is_null()) next = json::object();
      if (!next.is_object()) fail(source, line, "'" + keys[i] + "' is not a table");
      target = &next;
    }
    if (target->contains(keys.back())) fail(source, line, "duplicate key '" + keys.back() + "'");
    const std::string value_text = trim(s.substr(eq + 1));
    (*target)[keys.back()] = ValueParser(value_text, source, line).parse_all();
  }
  return root;
}

json read_config_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const bool is_json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  if (is_json) {
    try {
      return json::parse(text);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Format, path + ": " + e.what());
    }
  }
  return parse_toml(text, path);
}

RunConfig config_from_json(const json& doc, const RunConfig& base) {
  RunConfig c = base;
  optim::TrainConfig& t = c.train;
  field::FieldConfig& f = c.field;
  const Table train = {
      {"iterations", integer(t.iterations)},
      {"rebuild_every", integer(t.rebuild_every)},
      {"densify_every", integer(t.densify_every)},
      {"densify_until", integer(t.densify_until)},
      {"optimize_vertices", boolean(t.optimize_vertices)},
      {"spike_duration", real(t.spike_duration)},
      {"threads", integer(t.threads)},
      {"seed", integer(t.seed)},
      {"scene_scale", real(t.scene_scale)},
      {"checkpoint_every", integer(c.checkpoint_every)},
  };
  const Table lr = {
      {"grid", lr_range(t.grid_lr)},
      {"heads", lr_range(t.heads_lr)},
      {"vertices", lr_range(t.vertex_lr)},
  };
  const Table loss = {
      {"ssim", real(t.weights.ssim)},
      {"distortion", real(t.weights.distortion)},
      {"weight_decay", real(t.weights.weight_decay)},
  };
  const Table adam = {
      {"beta1", real(t.adam.beta1)},
      {"beta2", real(t.adam.beta2)},
      {"eps", real(t.adam.eps)},
  };
  const Table densify = {
      {"ssim_threshold", real(t.densify.ssim_threshold)},
      {"variance_threshold", real(t.densify.variance_threshold)},
      {"sample_size", integer(t.densify.sample_size)},
      {"interior_tolerance", real(t.densify.interior_tolerance)},
  };
  const Table render = {
      {"early_out", real(t.render.early_out)},
      {"tile_size", integer(t.render.tile_size)},
      {"background", rgb(t.render.background)},
  };
  const Table grid = {
      {"levels", integer(f.grid.levels)},
      {"n_min", integer(f.grid.n_min)},
      {"n_max", integer(f.grid.n_max)},
      {"log2_table_size", integer(f.grid.log2_table_size)},
      {"features", integer(f.grid.features)},
      {"init_scale", real(f.grid.init_scale)},
  };
  const Table heads = {
      {"hidden", integer(f.heads.hidden)},
      {"sh_degree", integer(f.heads.sh_degree)},
      {"init_log_density", real(f.heads.init_log_density)},
      {"init_color_bias", real(f.heads.init_color_bias)},
  };
  const Table field = {
      {"center", query_center(f.center)},
      {"softplus_beta", real(f.softplus_beta)},
      {"radius_cap", real(f.radius_cap)},
  };

  if (!doc.is_object()) throw Error(ErrorCode::Format, "config must be a table");
  for (const auto& [name, section] : doc.items()) {
    if (name == "train") {
      apply(section, name, train);
    } else if (name == "lr") {
      apply(section, name, lr);
    } else if (name == "loss") {
      apply(section, name, loss);
    } else if (name == "adam") {
      apply(section, name, adam);
    } else if (name == "densify") {
      apply(section, name, densify);
    } else if (name == "render") {
      apply(section, name, render);
    } else if (name == "field") {
      apply(section, name, field,
            {{"grid", [&](const json& s) { apply(s, "field.grid", grid); }},
             {"heads", [&](const json& s) { apply(s, "field.heads", heads); }}});
    } else {
      throw Error(ErrorCode::Format, "unknown config section '" + name + "'");
    }
  }
  return c;
}

json config_to_json(const RunConfig& c) {
  const optim::TrainConfig& t = c.train;
  const field::FieldConfig& f = c.field;
  const auto range = [](const optim::LrRange& r) { return json::array({r.initial, r.final}); };
  json doc;
  doc["train"] = {{"iterations", t.iterations},
                  {"rebuild_every", t.rebuild_every},
                  {"densify_every", t.densify_every},
                  {"densify_until", t.densify_until},
                  {"optimize_vertices", t.optimize_vertices},
                  {"spike_duration", t.spike_duration},
                  {"threads", t.threads},
                  {"seed", t.seed},
                  {"scene_scale", t.scene_scale},
                  {"checkpoint_every", c.checkpoint_every}};
  doc["lr"] = {{"grid", range(t.grid_lr)}, {"heads", range(t.heads_lr)}, {"vertices", range(t.vertex_lr)}};
  doc["loss"] = {{"ssim", t.weights.ssim},
                 {"distortion", t.weights.distortion},
                 {"weight_decay", t.weights.weight_decay}};
  doc["adam"] = {{"beta1", t.adam.beta1}, {"beta2", t.adam.beta2}, {"eps", t.adam.eps}};
  doc["densify"] = {{"ssim_threshold", t.densify.ssim_threshold},
                    {"variance_threshold", t.densify.variance_threshold},
                    {"sample_size", t.densify.sample_size},
                    {"interior_tolerance", t.densify.interior_tolerance}};
  doc["render"] = {{"early_out", t.render.early_out},
                   {"tile_size", t.render.tile_size},
                   {"background", json::array({t.render.background.x, t.render.background.y,
                                               t.render.background.z})}};
  doc["field"] = {
      {"center", f.center == field::QueryCenter::Centroid ? "centroid" : "circumcenter"},
      {"softplus_beta", f.softplus_beta},
      {"radius_cap", f.radius_cap},
      {"grid",
       {{"levels", f.grid.levels},
        {"n_min", f.grid.n_min},
        {"n_max", f.grid.n_max},
        {"log2_table_size", f.grid.log2_table_size},
        {"features", f.grid.features},
        {"init_scale", f.grid.init_scale}}},
      {"heads",
       {{"hidden", f.heads.hidden},
        {"sh_degree", f.heads.sh_degree},
        {"init_log_density", f.heads.init_log_density},
        {"init_color_bias", f.heads.init_color_bias}}}};
  return doc;
}

RunConfig load_config(const std::string& path) {
  RunConfig c = config_from_json(read_config_document(path));
  c.train.validate();
  return c;
}

}  // namespace radmesh::io
