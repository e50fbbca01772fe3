#include "radiomap/io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "binary_io.hpp"
#include "radiomap/config.hpp"

namespace radiomap {

namespace fs = std::filesystem;

void write_f32(const std::string& path, const std::vector<float>& values) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!os) throw IoError("failed writing " + path);
}

std::vector<float> read_f32(const std::string& path, std::size_t expected_count) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) throw IoError("cannot open " + path);
  const auto bytes = static_cast<std::size_t>(is.tellg());
  if (bytes != expected_count * sizeof(float)) {
    throw IoError(path + ": expected " + std::to_string(expected_count) + " floats, file holds " + std::to_string(bytes) + " bytes");
  }
  is.seekg(0);
  std::vector<float> out(expected_count);
  is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
  if (!is) throw IoError("failed reading " + path);
  return out;
}

std::vector<float> tensor_to_f32(const Matrix& unfolded) {
  std::vector<float> out(static_cast<std::size_t>(unfolded.size()));
  std::size_t t = 0;
  for (Eigen::Index q = 0; q < unfolded.cols(); ++q)
    for (Eigen::Index k = 0; k < unfolded.rows(); ++k) out[t++] = static_cast<float>(unfolded(k, q));
  return out;
}

Matrix tensor_from_f32(const std::vector<float>& values, const GridSpec& grid) {
  if (values.size() != static_cast<std::size_t>(grid.cells()) * grid.bins) throw ShapeError("tensor payload size mismatch");
  Matrix m(grid.bins, grid.cells());
  std::size_t t = 0;
  for (Eigen::Index q = 0; q < m.cols(); ++q)
    for (Eigen::Index k = 0; k < m.rows(); ++k) m(k, q) = values[t++];
  return m;
}

void write_observations_csv(std::ostream& os, const FiberObservations& obs) {
  const GridSpec& g = obs.grid();
  os << "dims," << g.rows << ',' << g.cols << ',' << g.bins << "\n";
  os << "i,j,k,value\n";
  os.precision(17);
  const auto& cells = obs.mask().cells();
  for (std::size_t m = 0; m < cells.size(); ++m)
    for (int k = 0; k < g.bins; ++k)
      os << cells[m].i << ',' << cells[m].j << ',' << k << ',' << obs.fibers()(k, static_cast<Eigen::Index>(m)) << "\n";
}

FiberObservations read_observations_csv(std::istream& is) {
  std::string line;
  int lineno = 0;
  auto fields = [&](const std::string& l) {
    std::vector<std::string> out;
    std::stringstream ss(l);
    std::string f;
    while (std::getline(ss, f, ',')) out.push_back(f);
    return out;
  };
  auto fail = [&](const std::string& why) { return IoError("observation CSV line " + std::to_string(lineno) + ": " + why); };
  if (!std::getline(is, line)) throw IoError("observation CSV is empty");
  ++lineno;
  auto head = fields(line);
  if (head.size() != 4 || head[0] != "dims") throw fail("expected 'dims,I,J,K'");
  GridSpec grid;
  try {
    grid = {std::stoi(head[1]), std::stoi(head[2]), std::stoi(head[3])};
  } catch (const std::exception&) {
    throw fail("bad dimensions");
  }
  grid.validate();
  if (!std::getline(is, line)) throw fail("missing column header");
  ++lineno;
  std::map<int, Vector> fibers;
  std::map<int, std::vector<bool>> seen;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = fields(line);
    if (f.size() != 4) throw fail("expected 4 fields");
    int i, j, k;
    double v;
    try {
      i = std::stoi(f[0]);
      j = std::stoi(f[1]);
      k = std::stoi(f[2]);
      v = std::stod(f[3]);
    } catch (const std::exception&) {
      throw fail("unparseable field");
    }
    if (i < 0 || i >= grid.rows || j < 0 || j >= grid.cols || k < 0 || k >= grid.bins) throw fail("index out of range");
    if (!std::isfinite(v)) throw fail("non-finite value");
    const int q = flat_index(grid.cols, {i, j});
    auto [it, inserted] = fibers.try_emplace(q, Vector::Zero(grid.bins));
    auto& flags = seen[q];
    if (inserted) flags.assign(static_cast<std::size_t>(grid.bins), false);
    if (flags[k]) throw fail("duplicate entry");
    flags[k] = true;
    it->second(k) = v;
  }
  if (fibers.empty()) throw IoError("observation CSV holds no entries");
  std::vector<int> flat;
  for (const auto& [q, flags] : seen) {
    if (std::find(flags.begin(), flags.end(), false) != flags.end()) {
      const Cell c = cell_of(grid.cols, q);
      throw IoError("observation CSV: fiber at (" + std::to_string(c.i) + "," + std::to_string(c.j) + ") is incomplete");
    }
    flat.push_back(q);
  }
  SensingMask mask = SensingMask::from_flat(grid.rows, grid.cols, flat);
  Matrix Y(grid.bins, mask.size());
  for (int m = 0; m < mask.size(); ++m) Y.col(m) = fibers.at(mask.columns()[m]);
  return FiberObservations(grid, std::move(mask), std::move(Y));
}

FiberObservations load_observations_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  return read_observations_csv(is);
}

void write_scene(const std::string& dir, const Scene& scene, const SceneConfig& cfg) {
  fs::create_directories(dir);
  const GridSpec& g = scene.truth.grid();
  write_f32(dir + "/truth.f32", tensor_to_f32(scene.truth.unfolded()));
  write_f32(dir + "/noise.f32", tensor_to_f32(scene.noise));
  {
    std::ofstream os(dir + "/observations.csv");
    if (!os) throw IoError("cannot write " + dir + "/observations.csv");
    write_observations_csv(os, scene.observations);
  }
  {
    const Matrix& C = scene.factors.C;
    const Matrix& S = scene.factors.S;
    std::vector<float> v;
    v.reserve(static_cast<std::size_t>(C.size() + S.size()));
    for (Eigen::Index r = 0; r < C.cols(); ++r)
      for (Eigen::Index k = 0; k < C.rows(); ++k) v.push_back(static_cast<float>(C(k, r)));
    for (Eigen::Index r = 0; r < S.rows(); ++r)
      for (Eigen::Index q = 0; q < S.cols(); ++q) v.push_back(static_cast<float>(S(r, q)));
    write_f32(dir + "/factors.f32", v);
  }
  std::ofstream os(dir + "/scene.meta");
  if (!os) throw IoError("cannot write " + dir + "/scene.meta");
  os << "# radiomap scene v1\n";
  write_scene_config(os, cfg);
  os << "[emitters]\n";
  os << "count = " << scene.emitters.size() << "\n";
  for (std::size_t r = 0; r < scene.emitters.size(); ++r) {
    const ShadowParams& e = scene.emitters[r];
    os << "e" << r << " = " << e.location[0] << ", " << e.location[1] << ", " << e.pathloss << ", " << e.shadow_variance
       << ", " << e.decorrelation << "\n";
  }
  os << "exclusive_bins = ";
  for (std::size_t r = 0; r < scene.exclusive_bins.size(); ++r) os << (r ? ", " : "") << scene.exclusive_bins[r];
  os << "\n[dims]\nrows = " << g.rows << "\ncols = " << g.cols << "\nbins = " << g.bins << "\nrank = " << scene.factors.rank()
     << "\nsensed = " << scene.observations.mask().size() << "\n";
}

SceneFiles read_scene(const std::string& dir) {
  const Config meta = Config::load(dir + "/scene.meta");
  SceneFiles out;
  out.config = scene_config_from(meta);
  const GridSpec g{meta.get_int("dims.rows", 0), meta.get_int("dims.cols", 0), meta.get_int("dims.bins", 0)};
  g.validate();
  const int R = meta.get_int("dims.rank", 0);
  if (R < 1) throw IoError(dir + "/scene.meta: missing dims.rank");
  out.truth = RadioMapTensor(g, tensor_from_f32(read_f32(dir + "/truth.f32", static_cast<std::size_t>(g.cells()) * g.bins), g));
  out.noise = tensor_from_f32(read_f32(dir + "/noise.f32", static_cast<std::size_t>(g.cells()) * g.bins), g);
  out.observations = load_observations_csv(dir + "/observations.csv");
  if (!(out.observations.grid() == g)) throw IoError(dir + ": observation dims disagree with scene.meta");
  const auto v = read_f32(dir + "/factors.f32", static_cast<std::size_t>(R) * (g.bins + g.cells()));
  out.factors.C.resize(g.bins, R);
  out.factors.S.resize(R, g.cells());
  std::size_t t = 0;
  for (int r = 0; r < R; ++r)
    for (int k = 0; k < g.bins; ++k) out.factors.C(k, r) = v[t++];
  for (int r = 0; r < R; ++r)
    for (int q = 0; q < g.cells(); ++q) out.factors.S(r, q) = v[t++];
  const int count = meta.get_int("emitters.count", 0);
  for (int r = 0; r < count; ++r) {
    const auto p = meta.get_doubles("emitters.e" + std::to_string(r), {});
    if (p.size() != 5) throw IoError(dir + "/scene.meta: emitter " + std::to_string(r) + " needs 5 values");
    ShadowParams e;
    e.location = {p[0], p[1]};
    e.pathloss = p[2];
    e.shadow_variance = p[3];
    e.decorrelation = p[4];
    out.emitters.push_back(e);
  }
  if (meta.has("emitters.exclusive_bins") && !meta.get_string("emitters.exclusive_bins", "").empty()) {
    out.exclusive_bins = meta.get_ints("emitters.exclusive_bins", {});
  }
  return out;
}

namespace {
constexpr char kCorpusMagic[4] = {'R', 'M', 'C', 'P'};
constexpr std::uint32_t kCorpusVersion = 1;
}  // namespace

void write_corpus(const std::string& path, const std::vector<TrainingSample>& corpus) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os.write(kCorpusMagic, 4);
  binary::put_u32(os, kCorpusVersion);
  binary::put_u64(os, corpus.size());
  for (const TrainingSample& s : corpus) {
    const int I = s.slf.rows(), J = s.slf.cols();
    binary::put_i32(os, I);
    binary::put_i32(os, J);
    for (Eigen::Index t = 0; t < s.slf.values().size(); ++t) binary::put_f32(os, static_cast<float>(s.slf.values().data()[t]));
    std::vector<std::uint8_t> bits((static_cast<std::size_t>(I) * J + 7) / 8, 0);
    for (std::size_t t = 0; t < s.mask.size(); ++t)
      if (s.mask[t]) bits[t / 8] |= static_cast<std::uint8_t>(1u << (t % 8));
    os.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
  }
  if (!os) throw IoError("failed writing " + path);
}

std::vector<TrainingSample> read_corpus(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCorpusMagic, 4) != 0) throw IoError(path + ": not a corpus file");
  if (binary::get_u32(is) != kCorpusVersion) throw IoError(path + ": unsupported corpus version");
  const std::uint64_t count = binary::get_u64(is);
  if (count > (1ull << 32)) throw IoError(path + ": implausible sample count");
  std::vector<TrainingSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t n = 0; n < count; ++n) {
    const int I = binary::get_i32(is), J = binary::get_i32(is);
    if (I < 1 || J < 1 || I > 4096 || J > 4096) throw IoError(path + ": corrupt record header");
    GridMatrix q(I, J);
    for (Eigen::Index t = 0; t < q.size(); ++t) q.data()[t] = binary::get_f32(is);
    TrainingSample s;
    try {
      s.slf = Slf(std::move(q));
    } catch (const Error& e) {
      throw IoError(path + ": record " + std::to_string(n) + ": " + e.what());
    }
    std::vector<std::uint8_t> bits((static_cast<std::size_t>(I) * J + 7) / 8);
    if (!is.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size()))) {
      throw IoError(path + ": truncated record " + std::to_string(n));
    }
    s.mask.resize(static_cast<std::size_t>(I) * J);
    for (std::size_t t = 0; t < s.mask.size(); ++t) s.mask[t] = (bits[t / 8] >> (t % 8)) & 1u;
    out.push_back(std::move(s));
  }
  return out;
}

void write_pgm(const std::string& path, const GridMatrix& map, bool decibels) {
  GridMatrix v = map;
  if (decibels) {
    const double floor = std::max(map.maxCoeff() * 1e-12, std::numeric_limits<double>::min());
    v = map.unaryExpr([floor](double x) { return 10.0 * std::log10(std::max(x, floor)); });
  }
  const double lo = v.minCoeff(), hi = v.maxCoeff();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << "P5\n" << map.cols() << ' ' << map.rows() << "\n255\n";
  for (Eigen::Index t = 0; t < v.size(); ++t) {
    const double u = hi > lo ? (v.data()[t] - lo) / (hi - lo) : 0.0;
    os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * u))));
  }
  std::vector<float> raw(static_cast<std::size_t>(map.size()));
  for (Eigen::Index t = 0; t < map.size(); ++t) raw[t] = static_cast<float>(map.data()[t]);
  write_f32(path + ".f32", raw);
}

void write_metrics_header(std::ostream& os) {
  os << kMetricsSchema << "\n";
  os << "method,seed,rho,eta,dcorr,R,R_hat,snr_db,sre,nae_c,nae_s,misdetection,runtime,status\n";
}

void write_metrics_row(std::ostream& os, const MetricsRow& r) {
  std::ostringstream s;
  s.precision(10);
  s << r.method << ',' << r.seed << ',' << r.rho << ',' << r.eta << ',' << r.dcorr << ',' << r.rank << ',' << r.rank_hat << ',';
  if (r.snr_db) {
    s << *r.snr_db;
  } else {
    s << "inf";
  }
  s << ',' << r.sre << ',' << r.nae_c << ',' << r.nae_s << ',' << r.misdetection << ',' << r.runtime << ',' << r.status << "\n";
  os << s.str();
}

void write_epoch_csv_header(std::ostream& os) { os << "epoch,train_loss,validation_loss\n"; }

void write_bound_report(std::ostream& os, const BoundInputs& in, const RecoveryBudget& budget,
                        const std::map<std::string, std::string>& extra) {
  os.precision(12);
  os << "# radiomap bound report v1\n";
  os << "[inputs]\n";
  os << "R = " << in.R << "\nK = " << in.K << "\nD = " << in.D << "\nalpha = " << in.alpha << "\nbeta = " << in.beta
     << "\nP = " << in.P << "\nq = " << in.q << "\nupsilon = " << in.upsilon << "\nnu = " << in.nu << "\ndelta = " << in.delta
     << "\nc = " << in.c_value() << (in.c ? "" : "  # default 1/R") << "\nomega = " << in.omega << "\nI = " << in.I
     << "\nJ = " << in.J << "\n";
  os << "[bounds]\n";
  os << "covering_log = " << covering_log(in, in.c_value() * in.R) << "\n";
  os << "gap_bound = " << gap_bound(in) << "\n";
  for (const BudgetTerm& t : budget.terms) {
    os << "budget_" << t.label << " = ";
    if (t.value) {
      os << *t.value;
    } else {
      os << "unavailable";
    }
    os << "\n";
  }
  os << "budget_total = ";
  if (budget.total) {
    os << *budget.total;
  } else {
    os << "unavailable";
  }
  os << "\n";
  if (!extra.empty()) {
    os << "[measured]\n";
    for (const auto& [k, v] : extra) os << k << " = " << v << "\n";
  }
}

}  // namespace radiomap
