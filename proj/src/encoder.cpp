#include "tasktree/encoder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "tasktree/common.hpp"

namespace tasktree {

std::vector<Matrix*> EncoderParams::all() {
  std::vector<Matrix*> out;
  for (Matrix& m : w1) out.push_back(&m);
  for (Matrix& m : w2) out.push_back(&m);
  out.push_back(&projector);
  out.push_back(&head1);
  out.push_back(&head2);
  return out;
}

std::vector<const Matrix*> EncoderParams::all() const {
  std::vector<const Matrix*> out;
  for (const Matrix& m : w1) out.push_back(&m);
  for (const Matrix& m : w2) out.push_back(&m);
  out.push_back(&projector);
  out.push_back(&head1);
  out.push_back(&head2);
  return out;
}

namespace {

Matrix glorot(int rows, int cols, RngStream& rng) {
  double a = std::sqrt(6.0 / (rows + cols));
  Matrix m = Matrix::zeros(rows, cols);
  for (double& v : m.a) v = (2.0 * rng.uniform() - 1.0) * a;
  return m;
}

}  // namespace

EncoderParams init_params(int feature_dim, int hidden_dim, int num_layers,
                          uint64_t seed, Activation activation,
                          double dropout_rate, bool tied_weights) {
  if (feature_dim < 1 || hidden_dim < 1)
    throw ValidationError("init_params: dimensions must be positive");
  if (num_layers < 1) throw ValidationError("init_params: need at least one layer");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw ValidationError("init_params: dropout_rate outside [0, 1)");
  if (tied_weights && feature_dim != hidden_dim)
    throw ValidationError("init_params: tied weights require feature_dim == hidden_dim");

  EncoderParams p;
  p.feature_dim = feature_dim;
  p.hidden_dim = hidden_dim;
  p.num_layers = num_layers;
  p.activation = activation;
  p.tied_weights = tied_weights;
  p.dropout_rate = dropout_rate;

  // One substream per matrix, indexed in a fixed order, so a given seed
  // always produces the same weights.
  uint64_t ordinal = 0;
  auto next = [&](int rows, int cols) {
    RngStream rng = substream(seed, "init", ordinal++);
    return glorot(rows, cols, rng);
  };
  int blocks = tied_weights ? 1 : num_layers;
  for (int l = 0; l < blocks; ++l) {
    int in = (l == 0) ? feature_dim : hidden_dim;
    p.w1.push_back(next(hidden_dim, in));
    p.w2.push_back(next(hidden_dim, in));
  }
  p.projector = next(hidden_dim, hidden_dim);
  p.head1 = next(hidden_dim, hidden_dim);
  p.head2 = next(hidden_dim, hidden_dim);
  return p;
}

namespace {

Matrix apply_act(const EncoderParams& p, Matrix m) {
  return p.activation == Activation::kRelu ? relu(m) : m;
}

}  // namespace

Matrix forward(const Graph& g, const EncoderParams& p) {
  if (g.feature_dim() != p.feature_dim)
    throw ValidationError("dimension error: graph features (" +
                          std::to_string(g.feature_dim()) + ") vs encoder (" +
                          std::to_string(p.feature_dim) + ")");
  Matrix z = g.features;
  for (int l = 0; l < p.num_layers; ++l) {
    Matrix m = neighbor_mean(g, z);
    z = apply_act(p, add(matmul_nt(z, p.w1_at(l)), matmul_nt(m, p.w2_at(l))));
  }
  return z;
}

Matrix project(const EncoderParams& p, const Matrix& z) {
  return matmul_nt(z, p.projector);
}

Matrix head_g(const EncoderParams& p, const Matrix& z) {
  return matmul_nt(apply_act(p, matmul_nt(z, p.head1)), p.head2);
}

ParamNodes register_params(Tape& t, EncoderParams& p) {
  ParamNodes pn;
  for (Matrix& m : p.w1) pn.w1.push_back(t.param(&m));
  for (Matrix& m : p.w2) pn.w2.push_back(t.param(&m));
  pn.projector = t.param(&p.projector);
  pn.head1 = t.param(&p.head1);
  pn.head2 = t.param(&p.head2);
  return pn;
}

Tape::Id build_encoder(Tape& t, const ParamNodes& pn, const EncoderParams& p,
                       const Graph& g, const ModelConfig& cfg) {
  if (g.feature_dim() != p.feature_dim)
    throw ValidationError("dimension error: build_encoder feature dim");
  bool train = cfg.mode == Mode::kTrain;
  if (train && p.dropout_rate > 0.0 && cfg.dropout_rng == nullptr)
    throw ValidationError("build_encoder: train mode needs a dropout stream");
  if (cfg.fanout >= 0 && cfg.sample_rng == nullptr)
    throw ValidationError("build_encoder: fanout sampling needs a sample stream");

  Tape::Id x = t.constant(g.features);
  for (int l = 0; l < p.num_layers; ++l) {
    if (train && p.dropout_rate > 0.0) {
      // One inverted-scaling mask per layer input; both the self path and
      // the aggregated path see the same dropped rows.
      const Matrix& cur = t.value(x);
      Matrix mask = Matrix::zeros(cur.rows, cur.cols);
      double keep = 1.0 - p.dropout_rate;
      for (double& v : mask.a)
        v = (cfg.dropout_rng->uniform() < p.dropout_rate) ? 0.0 : 1.0 / keep;
      x = t.mul_mask(x, std::move(mask));
    }
    Tape::Id m;
    if (cfg.fanout >= 0) {
      // Neighborhoods are resampled at every layer.
      auto groups = std::make_shared<Tape::Groups>();
      groups->reserve(g.num_nodes);
      for (int i = 0; i < g.num_nodes; ++i)
        groups->push_back(neighbor_sample(g, i, cfg.fanout, *cfg.sample_rng));
      m = t.mean_groups(x, std::move(groups));
    } else {
      m = t.mean_neighbors(x, &g);
    }
    int w1id = pn.w1[p.tied_weights ? 0 : l];
    int w2id = pn.w2[p.tied_weights ? 0 : l];
    Tape::Id pre = t.add(t.matmul_nt(x, w1id), t.matmul_nt(m, w2id));
    x = p.activation == Activation::kRelu ? t.relu(pre) : pre;
  }
  return x;
}

Tape::Id build_projector(Tape& t, const ParamNodes& pn, Tape::Id z) {
  return t.matmul_nt(z, pn.projector);
}

Tape::Id build_head(Tape& t, const ParamNodes& pn, const EncoderParams& p,
                    Tape::Id z) {
  Tape::Id h = t.matmul_nt(z, pn.head1);
  if (p.activation == Activation::kRelu) h = t.relu(h);
  return t.matmul_nt(h, pn.head2);
}

std::vector<Matrix*> GradientSet::all() {
  std::vector<Matrix*> out;
  for (Matrix& m : w1) out.push_back(&m);
  for (Matrix& m : w2) out.push_back(&m);
  out.push_back(&projector);
  out.push_back(&head1);
  out.push_back(&head2);
  return out;
}

GradientSet zero_like(const EncoderParams& p) {
  GradientSet gs;
  for (const Matrix& m : p.w1) gs.w1.push_back(Matrix::zeros(m.rows, m.cols));
  for (const Matrix& m : p.w2) gs.w2.push_back(Matrix::zeros(m.rows, m.cols));
  gs.projector = Matrix::zeros(p.projector.rows, p.projector.cols);
  gs.head1 = Matrix::zeros(p.head1.rows, p.head1.cols);
  gs.head2 = Matrix::zeros(p.head2.rows, p.head2.cols);
  return gs;
}

void collect_grads(const Tape& t, const ParamNodes& pn, GradientSet& gs) {
  for (size_t l = 0; l < pn.w1.size(); ++l) add_inplace(gs.w1[l], t.grad(pn.w1[l]));
  for (size_t l = 0; l < pn.w2.size(); ++l) add_inplace(gs.w2[l], t.grad(pn.w2[l]));
  add_inplace(gs.projector, t.grad(pn.projector));
  add_inplace(gs.head1, t.grad(pn.head1));
  add_inplace(gs.head2, t.grad(pn.head2));
}

// ---------------------------------------------------------------------------
// Checkpoint format, version 1:
//   magic "TTCKPT" | u16 version | i32 feature_dim | i32 hidden_dim |
//   i32 num_layers | u8 activation | u8 tied | f64 dropout_rate |
//   per matrix (w1 blocks, w2 blocks, projector, head1, head2):
//     i32 rows | i32 cols | rows*cols f64, row-major, little-endian.

namespace {

constexpr char kMagic[6] = {'T', 'T', 'C', 'K', 'P', 'T'};
constexpr uint16_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ValidationError("checkpoint error: truncated " + what);
  return v;
}

void put_matrix(std::ofstream& out, const Matrix& m) {
  put<int32_t>(out, m.rows);
  put<int32_t>(out, m.cols);
  out.write(reinterpret_cast<const char*>(m.a.data()),
            static_cast<std::streamsize>(m.a.size() * sizeof(double)));
}

Matrix get_matrix(std::ifstream& in, int rows, int cols, const std::string& name) {
  int32_t r = get<int32_t>(in, name);
  int32_t c = get<int32_t>(in, name);
  if (r != rows || c != cols)
    throw ValidationError("checkpoint error: " + name + " is " + std::to_string(r) +
                          "x" + std::to_string(c) + ", expected " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  Matrix m = Matrix::zeros(rows, cols);
  in.read(reinterpret_cast<char*>(m.a.data()),
          static_cast<std::streamsize>(m.a.size() * sizeof(double)));
  if (!in) throw ValidationError("checkpoint error: truncated " + name);
  return m;
}

}  // namespace

void save_checkpoint(const EncoderParams& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("checkpoint error: cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  put<uint16_t>(out, kVersion);
  put<int32_t>(out, p.feature_dim);
  put<int32_t>(out, p.hidden_dim);
  put<int32_t>(out, p.num_layers);
  put<uint8_t>(out, static_cast<uint8_t>(p.activation));
  put<uint8_t>(out, p.tied_weights ? 1 : 0);
  put<double>(out, p.dropout_rate);
  for (const Matrix* m : p.all()) put_matrix(out, *m);
  if (!out) throw ValidationError("checkpoint error: write failed for " + path);
}

EncoderParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("checkpoint error: cannot open " + path);
  char magic[6];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ValidationError("checkpoint error: bad magic in " + path);
  uint16_t version = get<uint16_t>(in, "version");
  if (version != kVersion)
    throw ValidationError("checkpoint error: unsupported version " +
                          std::to_string(version));
  EncoderParams p;
  p.feature_dim = get<int32_t>(in, "feature_dim");
  p.hidden_dim = get<int32_t>(in, "hidden_dim");
  p.num_layers = get<int32_t>(in, "num_layers");
  if (p.feature_dim < 1 || p.hidden_dim < 1 || p.num_layers < 1)
    throw ValidationError("checkpoint error: invalid dimensions");
  uint8_t act = get<uint8_t>(in, "activation");
  if (act > 1) throw ValidationError("checkpoint error: unknown activation");
  p.activation = static_cast<Activation>(act);
  uint8_t tied = get<uint8_t>(in, "tied flag");
  if (tied > 1) throw ValidationError("checkpoint error: bad tied flag");
  p.tied_weights = tied == 1;
  if (p.tied_weights && p.feature_dim != p.hidden_dim)
    throw ValidationError("checkpoint error: tied weights with feature_dim != hidden_dim");
  p.dropout_rate = get<double>(in, "dropout_rate");
  if (!(p.dropout_rate >= 0.0 && p.dropout_rate < 1.0))
    throw ValidationError("checkpoint error: dropout_rate outside [0, 1)");
  int blocks = p.tied_weights ? 1 : p.num_layers;
  for (int l = 0; l < blocks; ++l) {
    int inp = (l == 0) ? p.feature_dim : p.hidden_dim;
    p.w1.push_back(get_matrix(in, p.hidden_dim, inp, "w1"));
  }
  for (int l = 0; l < blocks; ++l) {
    int inp = (l == 0) ? p.feature_dim : p.hidden_dim;
    p.w2.push_back(get_matrix(in, p.hidden_dim, inp, "w2"));
  }
  p.projector = get_matrix(in, p.hidden_dim, p.hidden_dim, "projector");
  p.head1 = get_matrix(in, p.hidden_dim, p.hidden_dim, "head1");
  p.head2 = get_matrix(in, p.hidden_dim, p.hidden_dim, "head2");
  char extra;
  if (in.read(&extra, 1))
    throw ValidationError("checkpoint error: trailing bytes in " + path);
  return p;
}

}  // namespace tasktree
