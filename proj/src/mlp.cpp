#include "dreflex/mlp.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace dreflex {

const char* to_string(InputVariant v) {
  switch (v) {
    case InputVariant::Standard: return "standard";
    case InputVariant::PostureAblation: return "posture-ablation";
    case InputVariant::WallAblation: return "wall-ablation";
    case InputVariant::BothAblation: return "both-ablation";
    case InputVariant::JAddition: return "j-addition";
    case InputVariant::JdqAddition: return "jdq-addition";
  }
  return "?";
}

InputVariant input_variant_from_string(const std::string& s) {
  for (InputVariant v : {InputVariant::Standard, InputVariant::PostureAblation,
                         InputVariant::WallAblation, InputVariant::BothAblation,
                         InputVariant::JAddition, InputVariant::JdqAddition})
    if (s == to_string(v)) return v;
  throw std::invalid_argument("unknown input variant: " + s);
}

int FeatureSpec::dim() const {
  const int n = n_joints();
  switch (variant) {
    case InputVariant::Standard: return n + 4;
    case InputVariant::PostureAblation: return 4;
    case InputVariant::WallAblation: return n + 2;
    case InputVariant::BothAblation: return 2;
    case InputVariant::JAddition: return 2 * n + 4;
    case InputVariant::JdqAddition: return 3 * n + 4;
  }
  return 0;
}

FeatureSpec make_feature_spec(const RobotModel& model, InputVariant variant) {
  FeatureSpec spec;
  spec.variant = variant;
  const int na = model.n_actuated();
  spec.q_lower.resize(na);
  spec.q_upper.resize(na);
  spec.dq_limit.resize(na);
  for (int i = 0; i < na; ++i) {
    const Joint& j = model.joints[model.actuated[i]];
    spec.q_lower[i] = j.pos_lower;
    spec.q_upper[i] = j.pos_upper;
    spec.dq_limit[i] = j.vel_limit;
  }
  return spec;
}

VecX build_features(const FeatureSpec& spec, const VecX& q_act, const VecX& dq_act,
                    const VecX& damaged_mask, double d, double alpha, double x, double y) {
  const int n = spec.n_joints();
  VecX f(spec.dim());
  int k = 0;
  const bool has_q = spec.variant != InputVariant::PostureAblation &&
                     spec.variant != InputVariant::BothAblation;
  const bool has_wall = spec.variant != InputVariant::WallAblation &&
                        spec.variant != InputVariant::BothAblation;
  if (has_q) {
    for (int i = 0; i < n; ++i) {
      const double span = spec.q_upper[i] - spec.q_lower[i];
      f[k++] = 2.0 * (q_act[i] - spec.q_lower[i]) / span - 1.0;
    }
  }
  if (has_wall) {
    f[k++] = d;
    f[k++] = alpha;
  }
  f[k++] = x;
  f[k++] = y;
  if (spec.variant == InputVariant::JAddition || spec.variant == InputVariant::JdqAddition)
    for (int i = 0; i < n; ++i) f[k++] = damaged_mask[i];
  if (spec.variant == InputVariant::JdqAddition)
    for (int i = 0; i < n; ++i) f[k++] = dq_act[i] / spec.dq_limit[i];
  if (k != f.size()) throw std::logic_error("feature layout mismatch");
  return f;
}

MLPWeights MLPWeights::zeros_like() const {
  MLPWeights z;
  z.sizes = sizes;
  z.dropout = dropout;
  for (const MatX& w : W) z.W.push_back(MatX::Zero(w.rows(), w.cols()));
  for (const VecX& v : b) z.b.push_back(VecX::Zero(v.size()));
  return z;
}

MLPWeights make_mlp(const std::vector<int>& sizes, double dropout, uint64_t seed) {
  if (sizes.size() < 2 || sizes.back() != 1)
    throw std::invalid_argument("MLP sizes must end with an output of 1");
  MLPWeights net;
  net.sizes = sizes;
  net.dropout = dropout;
  SplitMix64 rng(seed);
  for (size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int rows = sizes[l + 1], cols = sizes[l];
    MatX w(rows, cols);
    const double scale = std::sqrt(2.0 / cols);  // He initialization
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = scale * rng.next_gaussian();
    net.W.push_back(std::move(w));
    net.b.push_back(VecX::Zero(rows));
  }
  return net;
}

namespace {

// forward with optional dropout masks; returns logits (pre-sigmoid) and the
// post-activation (post-mask) hidden layers needed for the backward pass
VecX forward_cached(const MLPWeights& net, const MatX& X, const std::vector<MatX>* masks,
                    std::vector<MatX>* hidden_out) {
  MatX h = X;
  const int L = net.n_layers();
  for (int l = 0; l < L - 1; ++l) {
    MatX z = (net.W[l] * h).colwise() + net.b[l];
    h = z.cwiseMax(0.0);
    if (masks) h = h.cwiseProduct((*masks)[l]);
    if (hidden_out) hidden_out->push_back(h);
  }
  return ((net.W[L - 1] * h).colwise() + net.b[L - 1]).transpose().col(0);
}

}  // namespace

VecX mlp_forward(const MLPWeights& net, const MatX& X) {
  const VecX z = forward_cached(net, X, nullptr, nullptr);
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

std::vector<MatX> sample_dropout_masks(const MLPWeights& net, int batch, SplitMix64& rng) {
  std::vector<MatX> masks;
  const double p = net.dropout;
  const double keep = 1.0 - p;
  for (int l = 0; l + 1 < net.n_layers(); ++l) {
    MatX m(net.sizes[l + 1], batch);
    for (int c = 0; c < batch; ++c)
      for (int r = 0; r < m.rows(); ++r)
        m(r, c) = rng.next_double() < p ? 0.0 : 1.0 / keep;  // inverted dropout
    masks.push_back(std::move(m));
  }
  return masks;
}

double mlp_loss_and_gradient(const MLPWeights& net, const MatX& X, const VecX& labels,
                             const std::vector<MatX>* masks, MLPWeights& grad) {
  const int n = static_cast<int>(X.cols());
  const int L = net.n_layers();
  std::vector<MatX> hidden;
  hidden.reserve(L - 1);
  const VecX z = forward_cached(net, X, masks, &hidden);

  // numerically stable BCE on logits: softplus(z) - y z
  double loss = 0.0;
  VecX dz(n);
  for (int i = 0; i < n; ++i) {
    const double zi = z[i];
    const double softplus = zi > 0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi));
    loss += softplus - labels[i] * zi;
    dz[i] = (1.0 / (1.0 + std::exp(-zi)) - labels[i]) / n;
  }
  loss /= n;
  if (!std::isfinite(loss)) throw std::runtime_error("non-finite training loss");

  grad = net.zeros_like();
  MatX delta = dz.transpose();  // 1 x n
  for (int l = L - 1; l >= 0; --l) {
    const MatX& input = l == 0 ? X : hidden[l - 1];
    grad.W[l] = delta * input.transpose();
    grad.b[l] = delta.rowwise().sum();
    if (l > 0) {
      MatX back = net.W[l].transpose() * delta;
      if (masks) back = back.cwiseProduct((*masks)[l - 1]);
      // ReLU gate: the cached activation is positive iff the unit was active
      delta = back.cwiseProduct(
          (hidden[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return loss;
}

AdamState AdamState::init(const MLPWeights& net) {
  AdamState s;
  s.m = net.zeros_like();
  s.v = net.zeros_like();
  return s;
}

void adam_step(MLPWeights& net, const MLPWeights& grad, AdamState& state,
               const AdamConfig& cfg) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  auto update = [&](auto& theta, const auto& g, auto& m, auto& v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const auto m_hat = m.array() / bc1;
    const auto v_hat = v.array() / bc2;
    theta.array() -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
  };
  for (int l = 0; l < net.n_layers(); ++l) {
    update(net.W[l], grad.W[l], state.m.W[l], state.v.W[l]);
    update(net.b[l], grad.b[l], state.m.b[l], state.v.b[l]);
  }
}

namespace {

constexpr char kMagic[8] = {'D', 'R', 'F', 'X', 'W', '0', '0', '1'};

void write_bytes(std::FILE* f, const void* p, size_t n, const std::string& path) {
  if (std::fwrite(p, 1, n, f) != n) throw std::runtime_error("write failed: " + path);
}

void read_bytes(std::FILE* f, void* p, size_t n, const std::string& path) {
  if (std::fread(p, 1, n, f) != n) throw std::runtime_error("truncated weights file: " + path);
}

void write_vec(std::FILE* f, const VecX& v, const std::string& path) {
  write_bytes(f, v.data(), sizeof(double) * v.size(), path);
}

void read_vec(std::FILE* f, VecX& v, const std::string& path) {
  read_bytes(f, v.data(), sizeof(double) * v.size(), path);
}

}  // namespace

void save_weights(const std::string& path, const MLPWeights& net, const FeatureSpec& spec) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  try {
    write_bytes(f, kMagic, sizeof(kMagic), path);
    const int32_t variant = static_cast<int32_t>(spec.variant);
    const int32_t n_layers = static_cast<int32_t>(net.sizes.size());
    const int32_t n_joints = spec.n_joints();
    write_bytes(f, &variant, 4, path);
    write_bytes(f, &n_layers, 4, path);
    write_bytes(f, &n_joints, 4, path);
    for (int s : net.sizes) {
      const int32_t v = s;
      write_bytes(f, &v, 4, path);
    }
    write_bytes(f, &net.dropout, 8, path);
    write_vec(f, spec.q_lower, path);
    write_vec(f, spec.q_upper, path);
    write_vec(f, spec.dq_limit, path);
    for (int l = 0; l < net.n_layers(); ++l) {
      // row-major on disk; Eigen default is column-major
      const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> wr =
          net.W[l];
      write_bytes(f, wr.data(), sizeof(double) * wr.size(), path);
      write_vec(f, net.b[l], path);
    }
  } catch (...) {
    std::fclose(f);
    throw;
  }
  if (std::fclose(f) != 0) throw std::runtime_error("close failed: " + path);
}

LoadedWeights load_weights(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open: " + path);
  LoadedWeights out;
  try {
    char magic[8];
    read_bytes(f, magic, 8, path);
    if (std::memcmp(magic, kMagic, 8) != 0)
      throw std::runtime_error("not a weights file: " + path);
    int32_t variant, n_layers, n_joints;
    read_bytes(f, &variant, 4, path);
    read_bytes(f, &n_layers, 4, path);
    read_bytes(f, &n_joints, 4, path);
    out.spec.variant = static_cast<InputVariant>(variant);
    out.net.sizes.resize(n_layers);
    for (int i = 0; i < n_layers; ++i) {
      int32_t v;
      read_bytes(f, &v, 4, path);
      out.net.sizes[i] = v;
    }
    read_bytes(f, &out.net.dropout, 8, path);
    out.spec.q_lower.resize(n_joints);
    out.spec.q_upper.resize(n_joints);
    out.spec.dq_limit.resize(n_joints);
    read_vec(f, out.spec.q_lower, path);
    read_vec(f, out.spec.q_upper, path);
    read_vec(f, out.spec.dq_limit, path);
    for (int l = 0; l + 1 < n_layers; ++l) {
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> wr(
          out.net.sizes[l + 1], out.net.sizes[l]);
      read_bytes(f, wr.data(), sizeof(double) * wr.size(), path);
      out.net.W.push_back(wr);
      VecX bias(out.net.sizes[l + 1]);
      read_vec(f, bias, path);
      out.net.b.push_back(std::move(bias));
    }
    if (out.spec.dim() != out.net.sizes.front())
      throw std::runtime_error("weights/feature-spec dimension mismatch: " + path);
  } catch (...) {
    std::fclose(f);
    throw;
  }
  std::fclose(f);
  return out;
}

}  // namespace dreflex
