#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "binary_io.hpp"
#include "radiomap/neural.hpp"
#include "radiomap/rng.hpp"

namespace radiomap {

namespace {

LayerSpec conv(int in, int out, int kernel, int stride, int padding, Activation act = Activation::kSelu) {
  LayerSpec s;
  s.kind = LayerKind::kConv;
  s.in_channels = in;
  s.out_channels = out;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  s.activation = act;
  return s;
}

LayerSpec deconv(int in, int out, int kernel, int stride, int padding, int output_padding = 0) {
  LayerSpec s = conv(in, out, kernel, stride, padding);
  s.kind = LayerKind::kConvTranspose;
  s.output_padding = output_padding;
  return s;
}

LayerSpec dense(int in, int out, Activation act, int out_height = 1, int out_width = 1) {
  LayerSpec s;
  s.kind = LayerKind::kDense;
  s.in_channels = in;
  s.out_channels = out;
  s.out_height = out_height;
  s.out_width = out_width;
  s.activation = act;
  return s;
}

int input_channels(const ArchConfig& arch) { return arch.mask_channel ? 2 : 1; }

void check_arch(const ArchConfig& arch) {
  if (arch.rows < 1 || arch.cols < 1) throw ConfigError("arch.rows and arch.cols must be positive");
  if (arch.latent_dim < 1) throw ConfigError("arch.latent_dim must be positive");
  if (!(arch.log_decades > 0.0)) throw ConfigError("arch.log_decades must be positive");
}

Autoencoder finish(const ArchConfig& arch, std::vector<LayerSpec> enc, std::vector<LayerSpec> dec, std::uint64_t seed) {
  Autoencoder ae;
  ae.arch = arch;
  ae.encoder = Network({input_channels(arch), arch.rows, arch.cols}, std::move(enc));
  ae.decoder = Network({arch.latent_dim, 1, 1}, std::move(dec));
  const Shape3 out = ae.decoder.output_shape();
  if (out.channels != 1 || out.height != arch.rows || out.width != arch.cols) {
    throw ConfigError("decoder output does not match the " + std::to_string(arch.rows) + "x" + std::to_string(arch.cols) + " grid");
  }
  if (ae.encoder.output_shape().size() != arch.latent_dim) throw ConfigError("encoder output does not match latent_dim");
  ae.encoder.init_random(seed);
  ae.decoder.init_random(seed + 1);
  return ae;
}

}  // namespace

Autoencoder make_desk_autoencoder(const ArchConfig& arch) {
  check_arch(arch);
  if (arch.rows != 32 || arch.cols != 32) throw ConfigError("the desk preset requires a 32x32 grid; use the dense preset otherwise");
  const int c = input_channels(arch);
  const int d = arch.latent_dim;
  std::vector<LayerSpec> enc = {conv(c, 16, 4, 2, 1), conv(16, 32, 4, 2, 1), conv(32, 64, 4, 2, 1),
                                conv(64, 128, 4, 2, 1), conv(128, d, 2, 1, 0)};
  std::vector<LayerSpec> dec = {deconv(d, 128, 2, 1, 0), deconv(128, 64, 4, 2, 1), deconv(64, 32, 4, 2, 1),
                                deconv(32, 16, 4, 2, 1), deconv(16, 2, 4, 2, 1), conv(2, 1, 3, 1, 1, Activation::kSigmoid)};
  return finish(arch, std::move(enc), std::move(dec), 101);
}

Autoencoder make_full_autoencoder(const ArchConfig& arch) {
  check_arch(arch);
  if (arch.rows != 50 || arch.cols != 50) throw ConfigError("the full preset requires a 50x50 grid");
  const int c = input_channels(arch);
  const int d = arch.latent_dim;
  std::vector<LayerSpec> enc = {conv(c, 32, 4, 2, 1), conv(32, 64, 4, 2, 1), conv(64, 128, 4, 2, 1),
                                conv(128, 256, 4, 2, 1), conv(256, d, 3, 1, 0)};
  std::vector<LayerSpec> dec = {deconv(d, 256, 3, 1, 0), deconv(256, 128, 4, 2, 1), deconv(128, 64, 4, 2, 1),
                                deconv(64, 32, 4, 2, 1, 1), deconv(32, 2, 4, 2, 1, 1), conv(2, 1, 4, 1, 1, Activation::kSigmoid)};
  return finish(arch, std::move(enc), std::move(dec), 201);
}

Autoencoder make_dense_autoencoder(const ArchConfig& arch, const std::vector<int>& hidden) {
  check_arch(arch);
  const int in = input_channels(arch) * arch.rows * arch.cols;
  std::vector<LayerSpec> enc, dec;
  int width = in;
  for (int h : hidden) {
    if (h < 1) throw ConfigError("hidden widths must be positive");
    enc.push_back(dense(width, h, Activation::kSelu));
    width = h;
  }
  enc.push_back(dense(width, arch.latent_dim, Activation::kSelu));
  width = arch.latent_dim;
  for (auto it = hidden.rbegin(); it != hidden.rend(); ++it) {
    dec.push_back(dense(width, *it, Activation::kSelu));
    width = *it;
  }
  dec.push_back(dense(width, 1, Activation::kSigmoid, arch.rows, arch.cols));
  return finish(arch, std::move(enc), std::move(dec), 301);
}

Vector encoder_input(const ArchConfig& arch, const GridMatrix& masked, const GridMatrix& mask) {
  if (masked.rows() != arch.rows || masked.cols() != arch.cols || mask.rows() != arch.rows || mask.cols() != arch.cols) {
    throw ShapeError("encoder input must be " + std::to_string(arch.rows) + "x" + std::to_string(arch.cols));
  }
  const Eigen::Index n = masked.size();
  Vector x = Vector::Zero(input_channels(arch) * n);
  double peak = 0.0;
  for (Eigen::Index t = 0; t < n; ++t)
    if (mask.data()[t] != 0.0) peak = std::max(peak, masked.data()[t]);
  if (peak > 0.0) {
    for (Eigen::Index t = 0; t < n; ++t) {
      if (mask.data()[t] == 0.0) continue;
      const double v = masked.data()[t] / peak;
      if (arch.input_transform == InputTransform::kLinear) {
        x(t) = v;
      } else {
        x(t) = v > 0.0 ? std::max(0.0, 1.0 + std::log10(v) / arch.log_decades) : 0.0;
      }
    }
  }
  if (arch.mask_channel) {
    for (Eigen::Index t = 0; t < n; ++t) x(n + t) = mask.data()[t] != 0.0 ? 1.0 : 0.0;
  }
  return x;
}

Slf SlfCompletion::scaled() const { return Slf(GridMatrix(scale * shape.values())); }

SlfCompletion complete_slf(const Autoencoder& ae, const Slf& incomplete, const SensingMask& mask) {
  if (incomplete.rows() != ae.arch.rows || incomplete.cols() != ae.arch.cols) {
    throw ShapeError("incomplete SLF is " + std::to_string(incomplete.rows()) + "x" + std::to_string(incomplete.cols()) +
                     " but the network was built for " + std::to_string(ae.arch.rows) + "x" + std::to_string(ae.arch.cols));
  }
  if (mask.rows() != ae.arch.rows || mask.cols() != ae.arch.cols) throw ShapeError("mask grid does not match the network");
  const GridMatrix ind = mask.indicator();
  const GridMatrix masked = incomplete.values().cwiseProduct(ind);
  SlfCompletion out;
  out.latent = ae.encoder.forward(encoder_input(ae.arch, masked, ind));
  out.shape = Slf(forward_decoder(ae.decoder, out.latent));
  double num = 0.0, den = 0.0;
  for (int q : mask.columns()) {
    const double s = out.shape.values().data()[q];
    num += s * masked.data()[q];
    den += s * s;
  }
  out.scale = den > 0.0 ? std::max(0.0, num / den) : 0.0;
  return out;
}

SlfCompletion complete_slf(const Autoencoder& ae, const Slf& incomplete) {
  std::vector<int> flat;
  for (Eigen::Index t = 0; t < incomplete.values().size(); ++t)
    if (incomplete.values().data()[t] > 0.0) flat.push_back(static_cast<int>(t));
  if (flat.empty()) {
    // Nothing sensed: the network still sees an all-zero input.
    SlfCompletion out;
    const GridMatrix zero = GridMatrix::Zero(ae.arch.rows, ae.arch.cols);
    out.latent = ae.encoder.forward(encoder_input(ae.arch, zero, zero));
    out.shape = Slf(forward_decoder(ae.decoder, out.latent));
    out.scale = 0.0;
    return out;
  }
  return complete_slf(ae, incomplete, SensingMask::from_flat(incomplete.rows(), incomplete.cols(), flat));
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Batch {
  Matrix input;
  Matrix target;
};

Batch make_batch(const ArchConfig& arch, const std::vector<TrainingSample>& corpus, const std::vector<int>& idx,
                 std::size_t begin, std::size_t end) {
  const int cells = arch.rows * arch.cols;
  Batch b;
  b.input.resize(input_channels(arch) * cells, static_cast<Eigen::Index>(end - begin));
  b.target.resize(cells, static_cast<Eigen::Index>(end - begin));
  for (std::size_t n = begin; n < end; ++n) {
    const TrainingSample& s = corpus[idx[n]];
    const Eigen::Index col = static_cast<Eigen::Index>(n - begin);
    GridMatrix mask(arch.rows, arch.cols);
    for (int t = 0; t < cells; ++t) mask.data()[t] = s.mask[t] ? 1.0 : 0.0;
    const GridMatrix masked = s.slf.values().cwiseProduct(mask);
    b.input.col(col) = encoder_input(arch, masked, mask);
    const double peak = s.slf.values().maxCoeff();
    const Vector q = Eigen::Map<const Vector>(s.slf.values().data(), cells);
    b.target.col(col) = peak > 0.0 ? Vector(q / peak) : Vector::Zero(cells);
  }
  return b;
}

void check_corpus(const ArchConfig& arch, const std::vector<TrainingSample>& corpus) {
  if (corpus.empty()) throw PreconditionError("training corpus is empty");
  const std::size_t cells = static_cast<std::size_t>(arch.rows) * arch.cols;
  for (std::size_t n = 0; n < corpus.size(); ++n) {
    if (corpus[n].slf.rows() != arch.rows || corpus[n].slf.cols() != arch.cols || corpus[n].mask.size() != cells) {
      throw ShapeError("corpus sample " + std::to_string(n) + " does not match the network grid");
    }
  }
}

void init_state(const Autoencoder& ae, TrainState& st) {
  st.m_weight.clear();
  st.v_weight.clear();
  st.m_bias.clear();
  st.v_bias.clear();
  for (const Network* net : {&ae.encoder, &ae.decoder}) {
    for (const Layer& l : net->layers()) {
      st.m_weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
      st.v_weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
      st.m_bias.push_back(Vector::Zero(l.bias.size()));
      st.v_bias.push_back(Vector::Zero(l.bias.size()));
    }
  }
  st.step = 0;
  st.epoch = 0;
}

bool state_matches(const Autoencoder& ae, const TrainState& st) {
  std::size_t n = 0;
  for (const Network* net : {&ae.encoder, &ae.decoder}) {
    for (const Layer& l : net->layers()) {
      if (n >= st.m_weight.size() || st.m_weight[n].rows() != l.weight.rows() || st.m_weight[n].cols() != l.weight.cols() ||
          st.m_bias[n].size() != l.bias.size()) {
        return false;
      }
      ++n;
    }
  }
  return n == st.m_weight.size();
}

double batch_loss(const Autoencoder& ae, const Batch& b) {
  const Matrix out = ae.decoder.forward(ae.encoder.forward(b.input));
  return (out - b.target).colwise().squaredNorm().sum();
}

}  // namespace

std::vector<EpochStats> train_autoencoder(const std::vector<TrainingSample>& corpus, Autoencoder& ae,
                                          const TrainConfig& cfg, TrainState& state, const EpochCallback& on_epoch) {
  check_corpus(ae.arch, corpus);
  if (cfg.epochs < 0 || cfg.batch_size < 1 || !(cfg.learning_rate > 0.0)) throw ConfigError("invalid training configuration");
  if (!(cfg.validation_fraction >= 0.0 && cfg.validation_fraction < 1.0)) {
    throw ConfigError("train.validation_fraction must lie in [0, 1)");
  }
  const bool fresh = state.m_weight.empty();
  if (fresh) {
    init_state(ae, state);
    state.seed = cfg.seed;
  } else if (!state_matches(ae, state)) {
    throw ConfigError("training state does not match the network architecture");
  }

  // Fixed split, independent of the epoch.
  const int total = static_cast<int>(corpus.size());
  std::vector<int> perm(static_cast<size_t>(total));
  std::iota(perm.begin(), perm.end(), 0);
  {
    Rng rng = Rng::substream(state.seed, 0);
    for (int n = total - 1; n > 0; --n) std::swap(perm[n], perm[rng.uniform_int(0, n)]);
  }
  const int n_val = total > 1 ? static_cast<int>(std::floor(cfg.validation_fraction * total)) : 0;
  std::vector<int> val(perm.begin(), perm.begin() + n_val);
  std::vector<int> train(perm.begin() + n_val, perm.end());

  // A sigmoid output starting at 1/2 against targets averaging a few percent
  // drives the narrow layer before it into SELU saturation within the first
  // steps. Starting the output bias at the logit of the mean target avoids it.
  if (fresh && !train.empty() && ae.decoder.layers().back().spec.activation == Activation::kSigmoid) {
    double sum = 0.0;
    for (int n : train) {
      const double peak = corpus[n].slf.values().maxCoeff();
      if (peak > 0.0) sum += corpus[n].slf.values().sum() / peak;
    }
    const double mean = std::clamp(sum / (static_cast<double>(train.size()) * ae.arch.rows * ae.arch.cols), 1e-4, 1.0 - 1e-4);
    ae.decoder.layers().back().bias.setConstant(static_cast<float>(std::log(mean / (1.0 - mean))));
  }

  const std::size_t n_enc = ae.encoder.layers().size();
  std::vector<EpochStats> trace;
  Tape enc_tape, dec_tape;
  for (int epoch = state.epoch; epoch < cfg.epochs; ++epoch) {
    const Autoencoder checkpoint = ae;
    const TrainState state_checkpoint = state;
    std::vector<int> order = train;
    Rng rng = Rng::substream(state.seed, static_cast<std::uint64_t>(epoch) + 1);
    for (int n = static_cast<int>(order.size()) - 1; n > 0; --n) std::swap(order[n], order[rng.uniform_int(0, n)]);

    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      const Batch b = make_batch(ae.arch, corpus, order, begin, end);
      const double bs = static_cast<double>(end - begin);
      const Matrix latent = ae.encoder.forward(b.input, enc_tape);
      const Matrix out = ae.decoder.forward(latent, dec_tape);
      const Matrix diff = out - b.target;
      const double loss = diff.squaredNorm();
      if (!std::isfinite(loss)) {
        ae = checkpoint;
        state = state_checkpoint;
        throw TrainingDiverged("training loss became non-finite in epoch " + std::to_string(epoch + 1), checkpoint);
      }
      loss_sum += loss;
      Gradients ge = ae.encoder.zero_gradients();
      Gradients gd = ae.decoder.zero_gradients();
      const Matrix dlatent = ae.decoder.backward(dec_tape, (2.0 / bs) * diff, &gd);
      ae.encoder.backward(enc_tape, dlatent, &ge);

      ++state.step;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
      const double lr = cfg.learning_rate * std::sqrt(c2) / c1;
      const double eps = cfg.epsilon * std::sqrt(c2);
      auto adam = [&](auto& param, const auto& grad, auto& m, auto& v) {
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
        param.array() -= lr * m.array() / (v.array().sqrt() + eps);
      };
      for (std::size_t n = 0; n < n_enc; ++n) {
        Layer& l = ae.encoder.layers()[n];
        adam(l.weight, ge.weight[n], state.m_weight[n], state.v_weight[n]);
        adam(l.bias, ge.bias[n], state.m_bias[n], state.v_bias[n]);
      }
      for (std::size_t n = 0; n < ae.decoder.layers().size(); ++n) {
        Layer& l = ae.decoder.layers()[n];
        adam(l.weight, gd.weight[n], state.m_weight[n_enc + n], state.v_weight[n_enc + n]);
        adam(l.bias, gd.bias[n], state.m_bias[n_enc + n], state.v_bias[n_enc + n]);
      }
    }
    // Parameters live on the float grid between epochs so that checkpoints
    // and resumed runs reproduce an uninterrupted run exactly.
    ae.encoder.round_to_float();
    ae.decoder.round_to_float();

    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.train_loss = order.empty() ? 0.0 : loss_sum / static_cast<double>(order.size());
    if (!val.empty()) {
      double v = 0.0;
      for (std::size_t begin = 0; begin < val.size(); begin += cfg.batch_size) {
        const std::size_t end = std::min(val.size(), begin + static_cast<std::size_t>(cfg.batch_size));
        v += batch_loss(ae, make_batch(ae.arch, corpus, val, begin, end));
      }
      stats.validation_loss = v / static_cast<double>(val.size());
    } else {
      stats.validation_loss = std::numeric_limits<double>::quiet_NaN();
    }
    if (!std::isfinite(stats.train_loss)) {
      ae = checkpoint;
      state = state_checkpoint;
      throw TrainingDiverged("training loss became non-finite in epoch " + std::to_string(epoch + 1), checkpoint);
    }
    state.epoch = epoch + 1;
    trace.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }

  // Record the largest latent norm seen on the corpus as the decoder's radius.
  double radius = 0.0;
  std::vector<int> all(static_cast<size_t>(total));
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t begin = 0; begin < all.size(); begin += 256) {
    const std::size_t end = std::min(all.size(), begin + 256);
    const Matrix z = ae.encoder.forward(make_batch(ae.arch, corpus, all, begin, end).input);
    radius = std::max(radius, z.colwise().norm().maxCoeff());
  }
  ae.decoder.set_latent_bound(radius);
  return trace;
}

// ---------------------------------------------------------------------------
// Files

namespace {
constexpr char kAeMagic[4] = {'R', 'M', 'A', 'E'};
constexpr char kStateMagic[4] = {'R', 'M', 'T', 'S'};
constexpr std::uint32_t kAeVersion = 1;

void put_matrix(std::ostream& os, const Matrix& m) {
  binary::put_i64(os, m.rows());
  binary::put_i64(os, m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) binary::put_f64(os, m(r, c));
}

Matrix get_matrix(std::istream& is) {
  const std::int64_t rows = binary::get_i64(is), cols = binary::get_i64(is);
  if (rows < 0 || cols < 0 || rows * cols > (std::int64_t{1} << 28)) throw IoError("corrupt training state: bad matrix size");
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = binary::get_f64(is);
  return m;
}
}  // namespace

void write_autoencoder(std::ostream& os, const Autoencoder& ae) {
  os.write(kAeMagic, 4);
  binary::put_u32(os, kAeVersion);
  binary::put_i32(os, ae.arch.rows);
  binary::put_i32(os, ae.arch.cols);
  binary::put_i32(os, ae.arch.latent_dim);
  binary::put_u8(os, ae.arch.mask_channel ? 1 : 0);
  binary::put_u8(os, static_cast<std::uint8_t>(ae.arch.input_transform));
  binary::put_f64(os, ae.arch.log_decades);
  write_network(os, ae.encoder);
  write_network(os, ae.decoder);
  if (!os) throw IoError("failed writing autoencoder");
}

Autoencoder read_autoencoder(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4)) throw IoError("corrupt model file: truncated header");
  if (std::memcmp(magic, kAeMagic, 4) != 0) throw IoError("corrupt model file: bad magic");
  const std::uint32_t version = binary::get_u32(is);
  if (version != kAeVersion) throw IoError("unsupported model file version " + std::to_string(version));
  Autoencoder ae;
  ae.arch.rows = binary::get_i32(is);
  ae.arch.cols = binary::get_i32(is);
  ae.arch.latent_dim = binary::get_i32(is);
  ae.arch.mask_channel = binary::get_u8(is) != 0;
  const std::uint8_t transform = binary::get_u8(is);
  if (transform > 1) throw IoError("corrupt model file: unknown input transform");
  ae.arch.input_transform = static_cast<InputTransform>(transform);
  ae.arch.log_decades = binary::get_f64(is);
  ae.encoder = read_network(is);
  ae.decoder = read_network(is);
  const Shape3 in = ae.encoder.input_shape();
  const Shape3 out = ae.decoder.output_shape();
  if (in.channels != input_channels(ae.arch) || in.height != ae.arch.rows || in.width != ae.arch.cols ||
      out.channels != 1 || out.height != ae.arch.rows || out.width != ae.arch.cols ||
      ae.encoder.output_shape().size() != ae.arch.latent_dim || ae.decoder.input_shape().size() != ae.arch.latent_dim) {
    throw IoError("model file networks do not match the stored architecture header");
  }
  return ae;
}

void save_autoencoder(const Autoencoder& ae, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_autoencoder(os, ae);
}

Autoencoder load_autoencoder(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return read_autoencoder(is);
}

void save_train_state(const TrainState& st, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os.write(kStateMagic, 4);
  binary::put_u32(os, kAeVersion);
  binary::put_i64(os, st.step);
  binary::put_i32(os, st.epoch);
  binary::put_u64(os, st.seed);
  binary::put_u32(os, static_cast<std::uint32_t>(st.m_weight.size()));
  for (std::size_t n = 0; n < st.m_weight.size(); ++n) {
    put_matrix(os, st.m_weight[n]);
    put_matrix(os, st.v_weight[n]);
    put_matrix(os, st.m_bias[n]);
    put_matrix(os, st.v_bias[n]);
  }
  if (!os) throw IoError("failed writing " + path);
}

TrainState load_train_state(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kStateMagic, 4) != 0) throw IoError("corrupt training state: bad magic");
  if (binary::get_u32(is) != kAeVersion) throw IoError("unsupported training state version");
  TrainState st;
  st.step = binary::get_i64(is);
  st.epoch = binary::get_i32(is);
  st.seed = binary::get_u64(is);
  const std::uint32_t n = binary::get_u32(is);
  if (n > 4096) throw IoError("corrupt training state: implausible layer count");
  for (std::uint32_t t = 0; t < n; ++t) {
    st.m_weight.push_back(get_matrix(is));
    st.v_weight.push_back(get_matrix(is));
    st.m_bias.push_back(get_matrix(is));
    st.v_bias.push_back(get_matrix(is));
  }
  return st;
}

}  // namespace radiomap
