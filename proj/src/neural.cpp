#include "radiomap/neural.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "radiomap/rng.hpp"
#include "binary_io.hpp"

namespace radiomap {

namespace {

constexpr double kSeluScale = 1.0507009873554804934193349852946;
constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

void activate(Activation a, const Matrix& pre, Matrix& post) {
  switch (a) {
    case Activation::kIdentity:
      post = pre;
      break;
    case Activation::kSelu:
      post = pre.unaryExpr([](double x) { return x > 0.0 ? kSeluScale * x : kSeluScale * kSeluAlpha * std::expm1(x); });
      break;
    case Activation::kSigmoid:
      post = pre.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
      break;
  }
}

// dL/dpre given dL/dpost.
Matrix activation_backward(Activation a, const Matrix& pre, const Matrix& post, const Matrix& dpost) {
  switch (a) {
    case Activation::kIdentity:
      return dpost;
    case Activation::kSelu:
      return dpost.binaryExpr(pre, [](double g, double x) {
        return x > 0.0 ? g * kSeluScale : g * kSeluScale * kSeluAlpha * std::exp(x);
      });
    case Activation::kSigmoid:
      return dpost.cwiseProduct(post.cwiseProduct((1.0 - post.array()).matrix()));
  }
  return dpost;
}

struct Geometry {
  int channels, big_h, big_w, kernel, stride, padding, small_h, small_w;
};

// Column matrix (C k k) x (B * small_h * small_w); column b*P + p gathers the
// big-image patch seen by small-grid position p of sample b.
Matrix im2col(const Matrix& images, const Geometry& g) {
  const int k = g.kernel;
  const int P = g.small_h * g.small_w;
  const Eigen::Index B = images.cols();
  const Eigen::Index rows = static_cast<Eigen::Index>(g.channels) * k * k;
  Matrix cols(rows, B * P);
  for (Eigen::Index b = 0; b < B; ++b) {
    const double* img = images.col(b).data();
    for (int oh = 0; oh < g.small_h; ++oh) {
      for (int ow = 0; ow < g.small_w; ++ow) {
        double* dst = cols.col(b * P + oh * g.small_w + ow).data();
        for (int c = 0; c < g.channels; ++c) {
          const double* plane = img + static_cast<std::ptrdiff_t>(c) * g.big_h * g.big_w;
          for (int kh = 0; kh < k; ++kh) {
            const int ih = oh * g.stride - g.padding + kh;
            for (int kw = 0; kw < k; ++kw) {
              const int iw = ow * g.stride - g.padding + kw;
              *dst++ = (ih >= 0 && ih < g.big_h && iw >= 0 && iw < g.big_w) ? plane[ih * g.big_w + iw] : 0.0;
            }
          }
        }
      }
    }
  }
  return cols;
}

// Adjoint of im2col: scatters-and-adds patches back into images.
Matrix col2im(const Matrix& cols, const Geometry& g, Eigen::Index batch) {
  const int k = g.kernel;
  const int P = g.small_h * g.small_w;
  Matrix images = Matrix::Zero(static_cast<Eigen::Index>(g.channels) * g.big_h * g.big_w, batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    double* img = images.col(b).data();
    for (int oh = 0; oh < g.small_h; ++oh) {
      for (int ow = 0; ow < g.small_w; ++ow) {
        const double* src = cols.col(b * P + oh * g.small_w + ow).data();
        for (int c = 0; c < g.channels; ++c) {
          double* plane = img + static_cast<std::ptrdiff_t>(c) * g.big_h * g.big_w;
          for (int kh = 0; kh < k; ++kh) {
            const int ih = oh * g.stride - g.padding + kh;
            for (int kw = 0; kw < k; ++kw, ++src) {
              const int iw = ow * g.stride - g.padding + kw;
              if (ih >= 0 && ih < g.big_h && iw >= 0 && iw < g.big_w) plane[ih * g.big_w + iw] += *src;
            }
          }
        }
      }
    }
  }
  return images;
}

// features x B  <->  C x (B * P)
Matrix to_channel_rows(const Matrix& x, int channels, int positions) {
  const Eigen::Index B = x.cols();
  Matrix out(channels, B * positions);
  for (Eigen::Index b = 0; b < B; ++b)
    for (int c = 0; c < channels; ++c)
      for (int p = 0; p < positions; ++p) out(c, b * positions + p) = x(static_cast<Eigen::Index>(c) * positions + p, b);
  return out;
}

Matrix from_channel_rows(const Matrix& m, int channels, int positions, Eigen::Index batch) {
  Matrix out(static_cast<Eigen::Index>(channels) * positions, batch);
  for (Eigen::Index b = 0; b < batch; ++b)
    for (int c = 0; c < channels; ++c)
      for (int p = 0; p < positions; ++p) out(static_cast<Eigen::Index>(c) * positions + p, b) = m(c, b * positions + p);
  return out;
}

Geometry conv_geometry(const Layer& l) {
  return {l.in.channels, l.in.height, l.in.width, l.spec.kernel, l.spec.stride, l.spec.padding, l.out.height, l.out.width};
}

Geometry transposed_geometry(const Layer& l) {
  return {l.out.channels, l.out.height, l.out.width, l.spec.kernel, l.spec.stride, l.spec.padding, l.in.height, l.in.width};
}

Matrix linear_forward(const Layer& l, const Matrix& x, bool with_bias) {
  const Eigen::Index B = x.cols();
  switch (l.spec.kind) {
    case LayerKind::kDense: {
      Matrix y = l.weight * x;
      if (with_bias) y.colwise() += l.bias;
      return y;
    }
    case LayerKind::kConv: {
      const Matrix cols = im2col(x, conv_geometry(l));
      Matrix m = l.weight * cols;
      if (with_bias) m.colwise() += l.bias;
      return from_channel_rows(m, l.out.channels, l.out.height * l.out.width, B);
    }
    case LayerKind::kConvTranspose: {
      const int P = l.in.height * l.in.width;
      const Matrix cols = l.weight.transpose() * to_channel_rows(x, l.in.channels, P);
      Matrix y = col2im(cols, transposed_geometry(l), B);
      if (with_bias) {
        const int Q = l.out.height * l.out.width;
        for (int c = 0; c < l.out.channels; ++c) y.middleRows(static_cast<Eigen::Index>(c) * Q, Q).array() += l.bias(c);
      }
      return y;
    }
  }
  return {};
}

// Returns dL/dx for dL/dy = dy; accumulates parameter gradients when asked.
Matrix linear_backward(const Layer& l, const Matrix& x, const Matrix& dy, Matrix* dW, Vector* db) {
  const Eigen::Index B = dy.cols();
  switch (l.spec.kind) {
    case LayerKind::kDense: {
      if (dW) dW->noalias() += dy * x.transpose();
      if (db) *db += dy.rowwise().sum();
      return l.weight.transpose() * dy;
    }
    case LayerKind::kConv: {
      const Geometry g = conv_geometry(l);
      const Matrix dm = to_channel_rows(dy, l.out.channels, l.out.height * l.out.width);
      if (dW) dW->noalias() += dm * im2col(x, g).transpose();
      if (db) *db += dm.rowwise().sum();
      return col2im(l.weight.transpose() * dm, g, B);
    }
    case LayerKind::kConvTranspose: {
      const Geometry g = transposed_geometry(l);
      const int P = l.in.height * l.in.width;
      const Matrix dcols = im2col(dy, g);
      if (dW) dW->noalias() += to_channel_rows(x, l.in.channels, P) * dcols.transpose();
      if (db) {
        const int Q = l.out.height * l.out.width;
        for (int c = 0; c < l.out.channels; ++c) (*db)(c) += dy.middleRows(static_cast<Eigen::Index>(c) * Q, Q).sum();
      }
      return from_channel_rows(l.weight * dcols, l.in.channels, P, B);
    }
  }
  return {};
}

int fan_in(const Layer& l) {
  switch (l.spec.kind) {
    case LayerKind::kDense:
      return l.spec.in_channels;
    case LayerKind::kConv:
      return l.spec.in_channels * l.spec.kernel * l.spec.kernel;
    case LayerKind::kConvTranspose:
      return std::max(1, l.spec.in_channels * l.spec.kernel * l.spec.kernel / (l.spec.stride * l.spec.stride));
  }
  return 1;
}

double round_float(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

Network::Network(Shape3 input, std::vector<LayerSpec> specs) : input_(input) {
  if (input_.channels < 1 || input_.height < 1 || input_.width < 1) throw ConfigError("network input shape must be positive");
  Shape3 cur = input_;
  for (size_t n = 0; n < specs.size(); ++n) {
    const LayerSpec& s = specs[n];
    const std::string where = "layer " + std::to_string(n + 1) + ": ";
    Layer l;
    l.spec = s;
    l.in = cur;
    if (s.in_channels < 1 || s.out_channels < 1) throw ConfigError(where + "channel counts must be positive");
    switch (s.kind) {
      case LayerKind::kDense:
        if (s.in_channels != cur.size()) {
          throw ConfigError(where + "dense input width " + std::to_string(s.in_channels) + " does not match " +
                            std::to_string(cur.size()) + " incoming features");
        }
        if (s.out_height < 1 || s.out_width < 1) throw ConfigError(where + "dense output geometry must be positive");
        l.out = {s.out_channels, s.out_height, s.out_width};
        l.weight = Matrix::Zero(l.out.size(), s.in_channels);
        l.bias = Vector::Zero(l.out.size());
        break;
      case LayerKind::kConv:
      case LayerKind::kConvTranspose: {
        if (s.in_channels != cur.channels) {
          throw ConfigError(where + "expects " + std::to_string(s.in_channels) + " input channels, got " +
                            std::to_string(cur.channels));
        }
        if (s.kernel < 1 || s.stride < 1 || s.padding < 0 || s.output_padding < 0) {
          throw ConfigError(where + "invalid convolution geometry");
        }
        int h, w;
        if (s.kind == LayerKind::kConv) {
          h = (cur.height + 2 * s.padding - s.kernel) / s.stride + 1;
          w = (cur.width + 2 * s.padding - s.kernel) / s.stride + 1;
          if (cur.height + 2 * s.padding < s.kernel || cur.width + 2 * s.padding < s.kernel) h = w = 0;
          l.weight = Matrix::Zero(s.out_channels, s.in_channels * s.kernel * s.kernel);
        } else {
          h = (cur.height - 1) * s.stride - 2 * s.padding + s.kernel + s.output_padding;
          w = (cur.width - 1) * s.stride - 2 * s.padding + s.kernel + s.output_padding;
          l.weight = Matrix::Zero(s.in_channels, s.out_channels * s.kernel * s.kernel);
        }
        if (h < 1 || w < 1) throw ConfigError(where + "produces an empty output");
        l.out = {s.out_channels, h, w};
        l.bias = Vector::Zero(s.out_channels);
        break;
      }
    }
    cur = l.out;
    layers_.push_back(std::move(l));
  }
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

void Network::init_random(std::uint64_t seed) {
  Rng rng(seed);
  for (Layer& l : layers_) {
    const double sd = 1.0 / std::sqrt(static_cast<double>(fan_in(l)));
    for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r) l.weight(r, c) = round_float(sd * rng.normal());
    l.bias.setZero();
  }
}

void Network::set_zero() {
  for (Layer& l : layers_) {
    l.weight.setZero();
    l.bias.setZero();
  }
}

void Network::round_to_float() {
  for (Layer& l : layers_) {
    l.weight = l.weight.unaryExpr(&round_float);
    l.bias = l.bias.unaryExpr(&round_float);
  }
}

Matrix Network::forward(const Matrix& X) const {
  if (X.rows() != input_.size()) {
    throw ShapeError("network expects " + std::to_string(input_.size()) + " input features, got " + std::to_string(X.rows()));
  }
  Matrix cur = X;
  for (const Layer& l : layers_) {
    Matrix post;
    activate(l.spec.activation, linear_forward(l, cur, true), post);
    cur = std::move(post);
  }
  return cur;
}

Matrix Network::forward(const Matrix& X, Tape& tape) const {
  if (X.rows() != input_.size()) {
    throw ShapeError("network expects " + std::to_string(input_.size()) + " input features, got " + std::to_string(X.rows()));
  }
  tape.inputs.resize(layers_.size());
  tape.pre.resize(layers_.size());
  tape.post.resize(layers_.size());
  const Matrix* cur = &X;
  for (size_t n = 0; n < layers_.size(); ++n) {
    tape.inputs[n] = *cur;
    tape.pre[n] = linear_forward(layers_[n], *cur, true);
    activate(layers_[n].spec.activation, tape.pre[n], tape.post[n]);
    cur = &tape.post[n];
  }
  return layers_.empty() ? X : tape.post.back();
}

Matrix Network::backward(const Tape& tape, const Matrix& cotangent, Gradients* grads) const {
  Matrix d = cotangent;
  for (size_t n = layers_.size(); n-- > 0;) {
    const Layer& l = layers_[n];
    const Matrix dpre = activation_backward(l.spec.activation, tape.pre[n], tape.post[n], d);
    d = linear_backward(l, tape.inputs[n], dpre, grads ? &grads->weight[n] : nullptr, grads ? &grads->bias[n] : nullptr);
  }
  return d;
}

Gradients Network::zero_gradients() const {
  Gradients g;
  for (const Layer& l : layers_) {
    g.weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Vector::Zero(l.bias.size()));
  }
  return g;
}

Vector Network::apply_linear(int layer, const Vector& x) const {
  return linear_forward(layers_.at(static_cast<size_t>(layer)), x, false);
}

Vector Network::apply_linear_adjoint(int layer, const Vector& y) const {
  const Layer& l = layers_.at(static_cast<size_t>(layer));
  return linear_backward(l, Matrix(), y, nullptr, nullptr);
}

bool Network::operator==(const Network& other) const {
  if (!(input_ == other.input_) || layers_.size() != other.layers_.size() || latent_bound_ != other.latent_bound_) return false;
  for (size_t n = 0; n < layers_.size(); ++n) {
    const Layer& a = layers_[n];
    const Layer& b = other.layers_[n];
    if (!(a.spec == b.spec) || a.weight != b.weight || a.bias != b.bias) return false;
  }
  return true;
}

GridMatrix forward_decoder(const Network& decoder, const Vector& z) {
  const Shape3 out = decoder.output_shape();
  if (out.channels != 1 && !(out.height == 1 && out.width == 1)) {
    throw ShapeError("decoder output must be a single-channel map");
  }
  if (decoder.latent_bound() > 0.0 && z.norm() > decoder.latent_bound()) {
    // Soft constraint: evaluated anyway.
  }
  const Matrix y = decoder.forward(z);
  if (out.channels == 1) return Eigen::Map<const GridMatrix>(y.data(), out.height, out.width);
  return Eigen::Map<const GridMatrix>(y.data(), 1, out.channels);
}

Vector grad_latent(const Network& decoder, const Vector& z, const GridMatrix& cotangent) {
  if (cotangent.size() != decoder.output_shape().size()) throw ShapeError("cotangent size does not match decoder output");
  Tape tape;
  decoder.forward(z, tape);
  const Vector ct = Eigen::Map<const Vector>(cotangent.data(), cotangent.size());
  return decoder.backward(tape, ct, nullptr);
}

double activation_lipschitz(Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return 1.0;
    case Activation::kSelu:
      return kSeluScale * kSeluAlpha;  // sup of the derivative, attained as x -> 0-
    case Activation::kSigmoid:
      return 0.25;
  }
  return 1.0;
}

LipschitzReport lipschitz_product(const Network& net, double tolerance, int max_iterations, std::uint64_t seed) {
  LipschitzReport report;
  Rng rng(seed);
  for (int n = 0; n < static_cast<int>(net.layers().size()); ++n) {
    const Layer& l = net.layers()[n];
    Vector v(l.in.size());
    for (Eigen::Index t = 0; t < v.size(); ++t) v(t) = rng.normal();
    v.normalize();
    double sigma = 0.0, change = 0.0;
    bool converged = false;
    for (int it = 0; it < max_iterations; ++it) {
      const Vector u = net.apply_linear(n, v);
      const double next = u.norm();
      Vector w = net.apply_linear_adjoint(n, u);
      const double wn = w.norm();
      change = std::abs(next - sigma);
      sigma = next;
      if (wn == 0.0) {
        converged = true;
        break;
      }
      v = w / wn;
      if (it > 0 && change <= tolerance * sigma) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      throw NumericalError("power iteration for layer " + std::to_string(n + 1) + " did not converge in " +
                           std::to_string(max_iterations) + " iterations (last change " + std::to_string(change) + ")");
    }
    const double phi = activation_lipschitz(l.spec.activation);
    report.spectral_norms.push_back(sigma);
    report.activation_constants.push_back(phi);
    report.product *= phi * sigma;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {
constexpr char kNetMagic[4] = {'R', 'M', 'N', 'N'};
constexpr std::uint32_t kNetVersion = 1;
}  // namespace

void write_network(std::ostream& os, const Network& net) {
  using namespace binary;
  os.write(kNetMagic, 4);
  put_u32(os, kNetVersion);
  const Shape3& in = net.input_shape();
  put_i32(os, in.channels);
  put_i32(os, in.height);
  put_i32(os, in.width);
  put_f64(os, net.latent_bound());
  put_u32(os, static_cast<std::uint32_t>(net.layers().size()));
  for (const Layer& l : net.layers()) {
    const LayerSpec& s = l.spec;
    put_u8(os, static_cast<std::uint8_t>(s.kind));
    put_u8(os, static_cast<std::uint8_t>(s.activation));
    for (int v : {s.in_channels, s.out_channels, s.kernel, s.stride, s.padding, s.output_padding, s.out_height, s.out_width}) put_i32(os, v);
    put_u32(os, static_cast<std::uint32_t>(l.weight.size()));
    put_u32(os, static_cast<std::uint32_t>(l.bias.size()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) put_f32(os, static_cast<float>(l.weight(r, c)));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) put_f32(os, static_cast<float>(l.bias(r)));
  }
  if (!os) throw IoError("failed writing network weights");
}

Network read_network(std::istream& is) {
  using namespace binary;
  char magic[4];
  if (!is.read(magic, 4)) throw IoError("corrupt weight file: truncated header");
  if (std::memcmp(magic, kNetMagic, 4) != 0) throw IoError("corrupt weight file: bad magic");
  const std::uint32_t version = get_u32(is);
  if (version != kNetVersion) throw IoError("unsupported weight file version " + std::to_string(version));
  Shape3 in;
  in.channels = get_i32(is);
  in.height = get_i32(is);
  in.width = get_i32(is);
  const double bound = get_f64(is);
  const std::uint32_t n_layers = get_u32(is);
  if (n_layers > 4096) throw IoError("corrupt weight file: implausible layer count");
  std::vector<LayerSpec> specs;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> counts;
  std::vector<std::vector<float>> payloads;
  for (std::uint32_t n = 0; n < n_layers; ++n) {
    LayerSpec s;
    const std::uint8_t kind = get_u8(is);
    const std::uint8_t act = get_u8(is);
    if (kind > 2 || act > 2) throw IoError("corrupt weight file: unknown layer kind or activation");
    s.kind = static_cast<LayerKind>(kind);
    s.activation = static_cast<Activation>(act);
    s.in_channels = get_i32(is);
    s.out_channels = get_i32(is);
    s.kernel = get_i32(is);
    s.stride = get_i32(is);
    s.padding = get_i32(is);
    s.output_padding = get_i32(is);
    s.out_height = get_i32(is);
    s.out_width = get_i32(is);
    const std::uint32_t nw = get_u32(is), nb = get_u32(is);
    if (nw > (1u << 28) || nb > (1u << 24)) throw IoError("corrupt weight file: implausible tensor size");
    std::vector<float> data(static_cast<size_t>(nw) + nb);
    for (float& f : data) f = get_f32(is);
    specs.push_back(s);
    counts.emplace_back(nw, nb);
    payloads.push_back(std::move(data));
  }
  Network net;
  try {
    net = Network(in, specs);
  } catch (const ConfigError& e) {
    throw IoError(std::string("weight file describes an invalid architecture: ") + e.what());
  }
  net.set_latent_bound(bound);
  for (size_t n = 0; n < specs.size(); ++n) {
    Layer& l = net.layers()[n];
    if (counts[n].first != l.weight.size() || counts[n].second != l.bias.size()) {
      throw IoError("weight file tensor sizes do not match layer " + std::to_string(n + 1) + " shape");
    }
    size_t t = 0;
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = payloads[n][t++];
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = payloads[n][t++];
  }
  return net;
}

void save_weights(const Network& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_network(os, net);
}

Network load_weights(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return read_network(is);
}

}  // namespace radiomap
