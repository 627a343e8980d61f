#include "radmesh/io/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "radmesh/error.hpp"
#include "radmesh/io/ply.hpp"

namespace radmesh::io {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr char kFieldMagic[8] = {'R', 'M', 'F', 'I', 'E', 'L', 'D', '\0'};
constexpr char kOptimMagic[8] = {'R', 'M', 'O', 'P', 'T', 'I', 'M', '\0'};

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void doubles(const std::vector<double>& v) {
    u64(v.size());
    bytes(v.data(), v.size() * sizeof(double));
  }
  void close() {
    out_.close();
    if (!out_) throw Error(ErrorCode::Io, "failed writing " + path_);
  }

 private:
  std::ofstream out_;
  std::string path_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw Error(ErrorCode::Io, "cannot open " + path);
  }
  void bytes(void* p, std::size_t n) {
    if (!in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n))) {
      throw Error(ErrorCode::Format, "truncated " + path_);
    }
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
  }
  std::vector<double> doubles() {
    const std::uint64_t n = u64();
    if (n > (std::uint64_t{1} << 34)) throw Error(ErrorCode::Format, "implausible array length in " + path_);
    std::vector<double> v(n);
    bytes(v.data(), n * sizeof(double));
    return v;
  }
  void header(const char (&magic)[8]) {
    char m[8];
    bytes(m, 8);
    if (std::memcmp(m, magic, 8) != 0) throw Error(ErrorCode::Format, path_ + " has the wrong magic");
    const std::uint32_t version = u32();
    if (version != kCheckpointVersion) {
      throw Error(ErrorCode::Format, path_ + " has unsupported version " + std::to_string(version));
    }
  }
  void finish() {
    if (in_.peek() != std::char_traits<char>::eof()) {
      throw Error(ErrorCode::Format, "trailing bytes in " + path_);
    }
  }

 private:
  std::ifstream in_;
  std::string path_;
};

void write_adam(Writer& w, const optim::Adam& a) {
  w.u64(a.steps());
  w.doubles(a.first_moment());
  w.doubles(a.second_moment());
}

optim::Adam read_adam(Reader& r, const optim::AdamConfig& config) {
  optim::Adam a(config);
  const std::uint64_t steps = r.u64();
  std::vector<double> m = r.doubles();
  std::vector<double> v = r.doubles();
  if (m.size() != v.size()) throw Error(ErrorCode::Format, "optimizer moments differ in size");
  a.restore(std::move(m), std::move(v), steps);
  return a;
}

}  // namespace

field::Field Checkpoint::make_field() const {
  field::Field f(config.field, config.train.seed);
  if (f.grid().params().size() != grid_params.size() ||
      f.heads().params().size() != heads_params.size()) {
    throw Error(ErrorCode::Format, "checkpoint parameters do not match the field config");
  }
  std::copy(grid_params.begin(), grid_params.end(), f.grid().params().begin());
  std::copy(heads_params.begin(), heads_params.end(), f.heads().params().begin());
  return f;
}

Checkpoint snapshot(const optim::Trainer& trainer, const RunConfig& config) {
  Checkpoint c;
  c.config = config;
  c.config.train.scene_scale = trainer.scene_scale();
  c.points = trainer.points();
  const auto g = trainer.field().grid().params();
  const auto h = trainer.field().heads().params();
  c.grid_params.assign(g.begin(), g.end());
  c.heads_params.assign(h.begin(), h.end());
  c.optimizer = trainer.optimizer();
  c.iteration = trainer.iteration();
  c.spikes = trainer.spikes();
  c.rng_state = trainer.rng_state();
  c.scene_scale = trainer.scene_scale();
  return c;
}

void save_checkpoint(const std::string& dir, const Checkpoint& c) {
  fs::create_directories(dir);
  const fs::path root(dir);
  write_points_ply((root / "points.ply").string(), c.points);

  Writer field((root / "field.bin").string());
  field.bytes(kFieldMagic, 8);
  field.u32(kCheckpointVersion);
  field.doubles(c.grid_params);
  field.doubles(c.heads_params);
  field.close();

  Writer optim((root / "optimizer.bin").string());
  optim.bytes(kOptimMagic, 8);
  optim.u32(kCheckpointVersion);
  write_adam(optim, c.optimizer.grid);
  write_adam(optim, c.optimizer.heads);
  write_adam(optim, c.optimizer.vertices);
  optim.close();

  json meta;
  meta["version"] = kCheckpointVersion;
  meta["iteration"] = c.iteration;
  meta["spikes"] = c.spikes;
  meta["rng_state"] = c.rng_state;
  meta["scene_scale"] = c.scene_scale;
  meta["points"] = c.points.size();
  meta["config"] = config_to_json(c.config);
  std::ofstream out(root / "meta.json");
  out << meta.dump(2) << "\n";
  if (!out) throw Error(ErrorCode::Io, "failed writing " + (root / "meta.json").string());
}

Checkpoint load_checkpoint(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw Error(ErrorCode::Io, "checkpoint directory " + dir + " not found");
  Checkpoint c;
  std::ifstream in(root / "meta.json");
  if (!in) throw Error(ErrorCode::Io, "cannot open " + (root / "meta.json").string());
  json meta;
  try {
    meta = json::parse(in);
    if (meta.at("version").get<std::uint32_t>() != kCheckpointVersion) {
      throw Error(ErrorCode::Format, "unsupported checkpoint version");
    }
    c.iteration = meta.at("iteration").get<std::uint64_t>();
    c.spikes = meta.at("spikes").get<std::vector<std::uint64_t>>();
    c.rng_state = meta.at("rng_state").get<std::string>();
    c.scene_scale = meta.at("scene_scale").get<double>();
    c.config = config_from_json(meta.at("config"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, (root / "meta.json").string() + ": " + e.what());
  }

  c.points = read_points_ply((root / "points.ply").string());
  if (c.points.size() != meta["points"].get<std::size_t>()) {
    throw Error(ErrorCode::Format, "point count differs from meta.json");
  }

  Reader field((root / "field.bin").string());
  field.header(kFieldMagic);
  c.grid_params = field.doubles();
  c.heads_params = field.doubles();
  field.finish();

  Reader optim((root / "optimizer.bin").string());
  optim.header(kOptimMagic);
  c.optimizer.grid = read_adam(optim, c.config.train.adam);
  c.optimizer.heads = read_adam(optim, c.config.train.adam);
  c.optimizer.vertices = read_adam(optim, c.config.train.adam);
  optim.finish();
  return c;
}

optim::Trainer resume_trainer(const Checkpoint& c, std::vector<optim::View> views) {
  optim::TrainConfig config = c.config.train;
  config.scene_scale = c.scene_scale;
  optim::Trainer trainer(c.points, std::move(views), c.config.field, config);
  const field::Field f = c.make_field();
  const auto g = f.grid().params();
  const auto h = f.heads().params();
  std::copy(g.begin(), g.end(), trainer.field().grid().params().begin());
  std::copy(h.begin(), h.end(), trainer.field().heads().params().begin());
  trainer.restore(c.points, c.iteration, c.spikes, c.optimizer, c.rng_state);
  return trainer;
}

MetricsWriter::MetricsWriter(const std::string& path, bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc), path_(path) {
  if (!out_) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  if (!append || fs::file_size(path) == 0) {
    out_ << "iteration,view,loss,photometric,distortion,weight_decay,psnr,tets,points,rebuilt,"
            "splits,lr_grid,lr_heads,lr_vertices\n";
  }
}

void MetricsWriter::write(const optim::StepStats& s, double grid_lr, double heads_lr,
                          double vertex_lr) {
  std::ostringstream row;
  row.precision(17);
  row << s.iteration << ',' << s.view << ',' << s.loss.total << ',' << s.loss.photometric << ','
      << s.loss.distortion << ',' << s.loss.weight_decay << ',' << s.loss.psnr << ',' << s.tets
      << ',' << s.points << ',' << (s.rebuilt ? 1 : 0) << ',' << s.splits << ',' << grid_lr << ','
      << heads_lr << ',' << vertex_lr << '\n';
  out_ << row.str();
  out_.flush();
  if (!out_) throw Error(ErrorCode::Io, "failed writing " + path_);
}

}  // namespace radmesh::io
