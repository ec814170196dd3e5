#include "xtal/model.hpp"

#include <cmath>

#include "xtal/errors.hpp"
#include "xtal/rng.hpp"

namespace xtal {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;

std::optional<Variant> variant_from_name(std::string_view name) {
  if (name == "unified") return Variant::Unified;
  if (name == "dual") return Variant::DualStream;
  return std::nullopt;
}

ModelConfig ModelConfig::desk(Variant v, AtomMode m) {
  ModelConfig c;
  c.variant = v;
  c.mode = m;
  c.hidden_dim = 64;
  c.num_layers = 4;
  c.num_heads = 4;
  c.atom_layers = 2;
  c.lattice_layers = 1;
  c.joint_layers = 1;
  return c;
}

ModelConfig ModelConfig::full(Variant v, AtomMode m) {
  ModelConfig c;
  c.variant = v;
  c.mode = m;
  c.hidden_dim = 512;
  c.num_layers = 18;
  c.num_heads = 8;
  c.atom_layers = 12;
  c.lattice_layers = 2;
  c.joint_layers = 2;
  return c;
}

void ModelConfig::validate() const {
  auto bad = [](const std::string& why) { throw_usage("invalid_config", why); };
  if (hidden_dim <= 0 || hidden_dim % 2 != 0)
    bad("hidden_dim must be positive and even (sinusoidal features pair up)");
  if (num_heads <= 0 || hidden_dim % num_heads != 0)
    bad("num_heads must divide hidden_dim");
  if (mlp_ratio <= 0) bad("mlp_ratio must be positive");
  if (variant == Variant::Unified) {
    if (num_layers <= 0) bad("num_layers must be positive");
  } else {
    if (atom_layers <= 0 || lattice_layers <= 0 || joint_layers <= 0)
      bad("dual-stream depths must all be positive");
  }
}

namespace {

void add_spec(std::vector<ParamSpec>& out, std::string name, int rows, int cols,
              bool zero_init) {
  out.push_back({std::move(name), rows, cols, zero_init});
}

void add_attn(std::vector<ParamSpec>& out, const std::string& prefix, int d) {
  for (const char* part : {"wq", "wk", "wv", "wo"}) add_spec(out, prefix + part, d, d, false);
  for (const char* part : {"bq", "bk", "bv", "bo"}) add_spec(out, prefix + part, 1, d, true);
}

void add_mlp(std::vector<ParamSpec>& out, const std::string& prefix, int d, int ratio) {
  add_spec(out, prefix + "w1", d, ratio * d, false);
  add_spec(out, prefix + "b1", 1, ratio * d, true);
  add_spec(out, prefix + "w2", ratio * d, d, false);
  add_spec(out, prefix + "b2", 1, d, true);
}

// One transformer block with AdaLN-Zero conditioning (six modulation chunks).
void add_block(std::vector<ParamSpec>& out, const std::string& prefix, int d, int ratio) {
  add_spec(out, prefix + "adaln.w", d, 6 * d, true);
  add_spec(out, prefix + "adaln.b", 1, 6 * d, true);
  add_attn(out, prefix + "attn.", d);
  add_mlp(out, prefix + "mlp.", d, ratio);
}

// One stream's half of a joint block: nine modulation chunks feeding
// self-attention, cross-attention, and a fused self-attention + MLP stage.
void add_joint_stream(std::vector<ParamSpec>& out, const std::string& prefix, int d,
                      int ratio) {
  add_spec(out, prefix + "adaln.w", d, 9 * d, true);
  add_spec(out, prefix + "adaln.b", 1, 9 * d, true);
  add_attn(out, prefix + "self1.", d);
  add_attn(out, prefix + "cross.", d);
  add_attn(out, prefix + "self2.", d);
  add_mlp(out, prefix + "mlp.", d, ratio);
}

}  // namespace

std::vector<ParamSpec> parameter_layout(const ModelConfig& cfg) {
  cfg.validate();
  const int d = cfg.hidden_dim;
  const int f = cfg.feature_dim();
  std::vector<ParamSpec> out;

  add_spec(out, "embed.lattice.w", 3, d, false);
  add_spec(out, "embed.lattice.b", 1, d, true);
  add_spec(out, "embed.atom.w", f, d, false);
  add_spec(out, "embed.atom.b", 1, d, true);
  if (cfg.variant == Variant::Unified) {
    add_spec(out, "embed.pos", cfg.tokens(), d, false);
    add_spec(out, "embed.type", 2, d, false);
  } else {
    add_spec(out, "embed.pos.lattice", cfg.lattice_tokens(), d, false);
    add_spec(out, "embed.pos.atom", cfg.atom_tokens(), d, false);
  }
  add_spec(out, "time.w1", d, d, false);
  add_spec(out, "time.b1", 1, d, true);
  add_spec(out, "time.w2", d, d, false);
  add_spec(out, "time.b2", 1, d, true);

  if (cfg.variant == Variant::Unified) {
    for (int i = 0; i < cfg.num_layers; ++i)
      add_block(out, "block" + std::to_string(i) + ".", d, cfg.mlp_ratio);
  } else {
    for (int i = 0; i < cfg.atom_layers; ++i)
      add_block(out, "astream.block" + std::to_string(i) + ".", d, cfg.mlp_ratio);
    for (int i = 0; i < cfg.lattice_layers; ++i)
      add_block(out, "lstream.block" + std::to_string(i) + ".", d, cfg.mlp_ratio);
    for (int i = 0; i < cfg.joint_layers; ++i) {
      add_joint_stream(out, "joint" + std::to_string(i) + ".a.", d, cfg.mlp_ratio);
      add_joint_stream(out, "joint" + std::to_string(i) + ".l.", d, cfg.mlp_ratio);
    }
  }

  add_spec(out, "final.adaln.w", d, 2 * d, true);
  add_spec(out, "final.adaln.b", 1, 2 * d, true);
  add_spec(out, "head.lattice.w", d, 3, true);
  add_spec(out, "head.lattice.b", 1, 3, true);
  add_spec(out, "head.atom.w", d, f, true);
  add_spec(out, "head.atom.b", 1, f, true);
  return out;
}

std::int64_t parameter_count(const ModelConfig& cfg) {
  std::int64_t n = 0;
  for (const auto& spec : parameter_layout(cfg))
    n += static_cast<std::int64_t>(spec.rows) * spec.cols;
  return n;
}

ModelParameters ModelParameters::init(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParameters p;
  p.config = cfg;
  p.layout = parameter_layout(cfg);
  p.values.reserve(p.layout.size());
  p.grads.reserve(p.layout.size());
  Rng rng(seed);
  for (size_t i = 0; i < p.layout.size(); ++i) {
    const auto& spec = p.layout[i];
    MatrixXd m = MatrixXd::Zero(spec.rows, spec.cols);
    if (!spec.zero_init)
      for (int r = 0; r < spec.rows; ++r)
        for (int c = 0; c < spec.cols; ++c) m(r, c) = 0.02 * rng.normal();
    p.values.push_back(std::move(m));
    p.grads.push_back(MatrixXd::Zero(spec.rows, spec.cols));
    p.index[spec.name] = static_cast<int>(i);
  }
  return p;
}

const Eigen::MatrixXd& ModelParameters::at(const std::string& name) const {
  auto it = index.find(name);
  if (it == index.end()) throw_data("unknown_parameter", "no parameter named '" + name + "'");
  return values[static_cast<size_t>(it->second)];
}

Eigen::MatrixXd& ModelParameters::at(const std::string& name) {
  auto it = index.find(name);
  if (it == index.end()) throw_data("unknown_parameter", "no parameter named '" + name + "'");
  return values[static_cast<size_t>(it->second)];
}

void ModelParameters::zero_grads() {
  for (auto& g : grads) g.setZero();
}

std::int64_t ModelParameters::count() const {
  std::int64_t n = 0;
  for (const auto& v : values) n += v.size();
  return n;
}

Eigen::RowVectorXd time_features(int t, int dim) {
  const int half = dim / 2;
  RowVectorXd feat(dim);
  for (int k = 0; k < half; ++k) {
    double freq = std::exp(-std::log(10000.0) * k / half);
    feat(k) = std::sin(t * freq);
    feat(half + k) = std::cos(t * freq);
  }
  return feat;
}

namespace {

constexpr double kLnEps = 1e-6;

MatrixXd layer_norm(const MatrixXd& x) {
  Eigen::VectorXd mean = x.rowwise().mean();
  MatrixXd centered = x.colwise() - mean;
  Eigen::VectorXd inv_std =
      ((centered.array().square().rowwise().sum() / x.cols()) + kLnEps).sqrt().inverse();
  return centered.array().colwise() * inv_std.array();
}

MatrixXd gelu(const MatrixXd& x) {
  return x.unaryExpr([](double t) { return t * 0.5 * (1.0 + std::erf(t / M_SQRT2)); });
}

// x * (1 + scale) + shift, modulation vectors broadcast over rows.
MatrixXd modulate(const MatrixXd& x, const RowVectorXd& shift, const RowVectorXd& scale) {
  MatrixXd out = x.array().rowwise() * (scale.array() + 1.0);
  return out.rowwise() + shift;
}

// Multi-head attention over per-item row blocks of the stacked token matrix.
// Q is [B*tq, d], K/V are [B*tk, d]; items are contiguous row groups.
MatrixXd attention(const MatrixXd& Q, const MatrixXd& K, const MatrixXd& V, int batch,
                   int tq, int tk, int heads, ForwardTrace* trace) {
  const int d = static_cast<int>(Q.cols());
  const int dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  MatrixXd out(Q.rows(), d);
  for (int b = 0; b < batch; ++b) {
    for (int h = 0; h < heads; ++h) {
      auto q = Q.block(b * tq, h * dh, tq, dh);
      auto k = K.block(b * tk, h * dh, tk, dh);
      auto v = V.block(b * tk, h * dh, tk, dh);
      MatrixXd scores = q * k.transpose() * inv_sqrt;
      MatrixXd soft(tq, tk);
      for (int i = 0; i < tq; ++i) {
        RowVectorXd row = scores.row(i);
        double m = row.maxCoeff();
        RowVectorXd e = (row.array() - m).exp();
        soft.row(i) = e / e.sum();
      }
      if (trace) trace->softmax_row_sums.push_back(soft.rowwise().sum());
      out.block(b * tq, h * dh, tq, dh) = soft * v;
    }
  }
  return out;
}

struct BlockMod {
  RowVectorXd shift, scale, gate;
};

// Slice a modulation row into consecutive (shift, scale, gate) triples.
std::vector<BlockMod> chunk_mods(const RowVectorXd& mod, int d, int groups) {
  std::vector<BlockMod> out(static_cast<size_t>(groups));
  for (int i = 0; i < groups; ++i) {
    out[static_cast<size_t>(i)].shift = mod.segment((3 * i + 0) * d, d);
    out[static_cast<size_t>(i)].scale = mod.segment((3 * i + 1) * d, d);
    out[static_cast<size_t>(i)].gate = mod.segment((3 * i + 2) * d, d);
  }
  return out;
}

struct PlainForward {
  const ModelParameters& p;
  int batch;
  int heads;
  int d;
  ForwardTrace* trace;

  const MatrixXd& w(const std::string& name) const { return p.at(name); }
  RowVectorXd row(const std::string& name) const { return p.at(name).row(0); }

  MatrixXd linear(const MatrixXd& x, const std::string& prefix, const char* wn,
                  const char* bn) const {
    return (x * w(prefix + wn)).rowwise() + row(prefix + bn);
  }

  MatrixXd attn_qkv(const MatrixXd& xq, const MatrixXd& xkv, const std::string& prefix,
                    int tq, int tk) const {
    MatrixXd Q = linear(xq, prefix, "wq", "bq");
    MatrixXd K = linear(xkv, prefix, "wk", "bk");
    MatrixXd V = linear(xkv, prefix, "wv", "bv");
    MatrixXd attn = attention(Q, K, V, batch, tq, tk, heads, trace);
    return linear(attn, prefix, "wo", "bo");
  }

  MatrixXd mlp(const MatrixXd& x, const std::string& prefix) const {
    return linear(gelu(linear(x, prefix, "w1", "b1")), prefix, "w2", "b2");
  }

  // Standard block: x + gate1 * Attn(mod1(LN x)) ; + gate2 * MLP(mod2(LN x)).
  void run_block(MatrixXd& x, const std::string& prefix, const RowVectorXd& cond,
                 int tokens) const {
    RowVectorXd mod = (cond * w(prefix + "adaln.w") + w(prefix + "adaln.b")).row(0);
    auto m = chunk_mods(mod, d, 2);
    MatrixXd attn_in = modulate(layer_norm(x), m[0].shift, m[0].scale);
    MatrixXd attn_out = attn_qkv(attn_in, attn_in, prefix + "attn.", tokens, tokens);
    x += (attn_out.array().rowwise() * m[0].gate.array()).matrix();
    MatrixXd mlp_out = mlp(modulate(layer_norm(x), m[1].shift, m[1].scale), prefix + "mlp.");
    x += (mlp_out.array().rowwise() * m[1].gate.array()).matrix();
  }
};

}  // namespace

std::vector<NetOutput> forward_batch(const ModelParameters& params,
                                     std::span<const CrystalTensor> states, int t,
                                     ForwardTrace* trace) {
  const ModelConfig& cfg = params.config;
  const int B = static_cast<int>(states.size());
  const int d = cfg.hidden_dim;
  const int f = cfg.feature_dim();
  if (B == 0) return {};
  for (const auto& s : states)
    if (s.mode != cfg.mode)
      throw_data("shape_mismatch", "state atom mode does not match model config");

  PlainForward fw{params, B, cfg.num_heads, d, trace};

  // Conditioning vector from the diffusion step.
  RowVectorXd temb = time_features(t, d);
  temb = gelu((temb * params.at("time.w1")).rowwise() + params.at("time.b1").row(0));
  temb = (temb * params.at("time.w2")).rowwise() + params.at("time.b2").row(0);
  RowVectorXd cond = gelu(temb);

  // Token embeddings, stacked per item.
  MatrixXd lat_in(3 * B, 3), atom_in(kMaxAtoms * B, f);
  for (int b = 0; b < B; ++b) {
    lat_in.block(3 * b, 0, 3, 3) = states[static_cast<size_t>(b)].lattice;
    atom_in.block(kMaxAtoms * b, 0, kMaxAtoms, f) = states[static_cast<size_t>(b)].atoms;
  }
  MatrixXd lat_tok = (lat_in * params.at("embed.lattice.w")).rowwise() +
                     params.at("embed.lattice.b").row(0);
  MatrixXd atom_tok =
      (atom_in * params.at("embed.atom.w")).rowwise() + params.at("embed.atom.b").row(0);

  auto finalize = [&](const MatrixXd& lat_final, const MatrixXd& atom_final) {
    RowVectorXd mod =
        (cond * params.at("final.adaln.w") + params.at("final.adaln.b")).row(0);
    RowVectorXd shift = mod.segment(0, d), scale = mod.segment(d, d);
    MatrixXd lat_head = (modulate(layer_norm(lat_final), shift, scale) *
                         params.at("head.lattice.w")).rowwise() +
                        params.at("head.lattice.b").row(0);
    MatrixXd atom_head = (modulate(layer_norm(atom_final), shift, scale) *
                          params.at("head.atom.w")).rowwise() +
                         params.at("head.atom.b").row(0);
    std::vector<NetOutput> out(static_cast<size_t>(B));
    for (int b = 0; b < B; ++b) {
      out[static_cast<size_t>(b)].lattice = lat_head.block(3 * b, 0, 3, 3);
      out[static_cast<size_t>(b)].atoms = atom_head.block(kMaxAtoms * b, 0, kMaxAtoms, f);
    }
    return out;
  };

  if (cfg.variant == Variant::Unified) {
    const int tok = cfg.tokens();
    MatrixXd x(tok * B, d);
    const MatrixXd& pos = params.at("embed.pos");
    const MatrixXd& type = params.at("embed.type");
    for (int b = 0; b < B; ++b) {
      x.block(tok * b, 0, 3, d) =
          lat_tok.block(3 * b, 0, 3, d) + pos.topRows(3) +
          type.row(0).replicate(3, 1);
      x.block(tok * b + 3, 0, kMaxAtoms, d) =
          atom_tok.block(kMaxAtoms * b, 0, kMaxAtoms, d) + pos.bottomRows(kMaxAtoms) +
          type.row(1).replicate(kMaxAtoms, 1);
    }
    for (int i = 0; i < cfg.num_layers; ++i)
      fw.run_block(x, "block" + std::to_string(i) + ".", cond, tok);

    MatrixXd lat_final(3 * B, d), atom_final(kMaxAtoms * B, d);
    for (int b = 0; b < B; ++b) {
      lat_final.block(3 * b, 0, 3, d) = x.block(tok * b, 0, 3, d);
      atom_final.block(kMaxAtoms * b, 0, kMaxAtoms, d) = x.block(tok * b + 3, 0, kMaxAtoms, d);
    }
    return finalize(lat_final, atom_final);
  }

  // Dual stream: separate token stacks, cascade then joint blocks.
  MatrixXd a = atom_tok, l = lat_tok;
  for (int b = 0; b < B; ++b) {
    a.block(kMaxAtoms * b, 0, kMaxAtoms, d) += params.at("embed.pos.atom");
    l.block(3 * b, 0, 3, d) += params.at("embed.pos.lattice");
  }
  for (int i = 0; i < cfg.atom_layers; ++i)
    fw.run_block(a, "astream.block" + std::to_string(i) + ".", cond, kMaxAtoms);
  for (int i = 0; i < cfg.lattice_layers; ++i)
    fw.run_block(l, "lstream.block" + std::to_string(i) + ".", cond, 3);

  for (int i = 0; i < cfg.joint_layers; ++i) {
    std::string pa = "joint" + std::to_string(i) + ".a.";
    std::string pl = "joint" + std::to_string(i) + ".l.";
    auto ma = chunk_mods((cond * params.at(pa + "adaln.w") + params.at(pa + "adaln.b")).row(0),
                         d, 3);
    auto ml = chunk_mods((cond * params.at(pl + "adaln.w") + params.at(pl + "adaln.b")).row(0),
                         d, 3);

    // Step 1: per-stream self-attention.
    MatrixXd a1 = a, l1 = l;
    {
      MatrixXd a_in = modulate(layer_norm(a), ma[0].shift, ma[0].scale);
      MatrixXd o = fw.attn_qkv(a_in, a_in, pa + "self1.", kMaxAtoms, kMaxAtoms);
      a1 += (o.array().rowwise() * ma[0].gate.array()).matrix();
      MatrixXd l_in = modulate(layer_norm(l), ml[0].shift, ml[0].scale);
      o = fw.attn_qkv(l_in, l_in, pl + "self1.", 3, 3);
      l1 += (o.array().rowwise() * ml[0].gate.array()).matrix();
    }

    // Step 2: bidirectional cross-attention against the partner's step-1 state.
    MatrixXd a2 = a1, l2 = l1;
    {
      MatrixXd o = fw.attn_qkv(modulate(layer_norm(a1), ma[1].shift, ma[1].scale),
                               layer_norm(l1), pa + "cross.", kMaxAtoms, 3);
      a2 += (o.array().rowwise() * ma[1].gate.array()).matrix();
      o = fw.attn_qkv(modulate(layer_norm(l1), ml[1].shift, ml[1].scale), layer_norm(a1),
                      pl + "cross.", 3, kMaxAtoms);
      l2 += (o.array().rowwise() * ml[1].gate.array()).matrix();
    }

    // Step 3: fused self-attention + MLP sharing one modulated input and gate.
    {
      MatrixXd a3 = modulate(layer_norm(a2), ma[2].shift, ma[2].scale);
      MatrixXd fused = fw.attn_qkv(a3, a3, pa + "self2.", kMaxAtoms, kMaxAtoms) +
                       fw.mlp(a3, pa + "mlp.");
      a = a2 + (fused.array().rowwise() * ma[2].gate.array()).matrix();
      MatrixXd l3 = modulate(layer_norm(l2), ml[2].shift, ml[2].scale);
      fused = fw.attn_qkv(l3, l3, pl + "self2.", 3, 3) + fw.mlp(l3, pl + "mlp.");
      l = l2 + (fused.array().rowwise() * ml[2].gate.array()).matrix();
    }
  }
  return finalize(l, a);
}

NetOutput forward_one(const ModelParameters& params, const CrystalTensor& state, int t) {
  return forward_batch(params, std::span<const CrystalTensor>(&state, 1), t)[0];
}

}  // namespace xtal
