#include "xtal/train.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "xtal/errors.hpp"
#include "xtal/tape.hpp"

namespace xtal {
namespace {

// Builds the training graph. Parameter leaves are created once and shared by
// every batch item; the per-item forward mirrors the plain inference path in
// model.cpp operation for operation.
class TapeModel {
 public:
  explicit TapeModel(const ModelParameters& params, const LossWeights& weights)
      : p_(params), w_(weights), d_(params.config.hidden_dim) {
    pnodes_.reserve(p_.layout.size());
    for (size_t i = 0; i < p_.layout.size(); ++i)
      pnodes_.push_back(tape_.leaf(p_.values[i], true));
  }

  ad::Tape& tape() { return tape_; }
  int pnode(size_t i) const { return pnodes_[i]; }

  struct ItemLoss {
    int total, lattice, atoms;
  };

  ItemLoss item_loss(const TrainItem& item) {
    const ModelConfig& cfg = p_.config;
    int cond = conditioning(item.t);
    int lat_in = tape_.constant(item.xt.lattice);
    int atom_in = tape_.constant(item.xt.atoms);
    int lat_tok = linear(lat_in, "embed.lattice.w", "embed.lattice.b");
    int atom_tok = linear(atom_in, "embed.atom.w", "embed.atom.b");

    int lat_final, atom_final;
    if (cfg.variant == Variant::Unified) {
      int x = tape_.vcat(lat_tok, atom_tok);
      x = tape_.add(x, node("embed.pos"));
      // Type rows broadcast through a fixed 0/1 selector.
      Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(cfg.tokens(), 2);
      for (int i = 0; i < 3; ++i) sel(i, 0) = 1.0;
      for (int i = 3; i < cfg.tokens(); ++i) sel(i, 1) = 1.0;
      x = tape_.add(x, tape_.matmul(tape_.constant(sel), node("embed.type")));
      for (int i = 0; i < cfg.num_layers; ++i)
        x = run_block(x, "block" + std::to_string(i) + ".", cond);
      lat_final = tape_.block(x, 0, 0, 3, d_);
      atom_final = tape_.block(x, 3, 0, kMaxAtoms, d_);
    } else {
      int a = tape_.add(atom_tok, node("embed.pos.atom"));
      int l = tape_.add(lat_tok, node("embed.pos.lattice"));
      for (int i = 0; i < cfg.atom_layers; ++i)
        a = run_block(a, "astream.block" + std::to_string(i) + ".", cond);
      for (int i = 0; i < cfg.lattice_layers; ++i)
        l = run_block(l, "lstream.block" + std::to_string(i) + ".", cond);
      for (int i = 0; i < cfg.joint_layers; ++i) {
        auto [a_next, l_next] = run_joint(a, l, "joint" + std::to_string(i) + ".", cond);
        a = a_next;
        l = l_next;
      }
      lat_final = l;
      atom_final = a;
    }

    // Shared final AdaLN + linear heads.
    int mod = tape_.add_rowvec(tape_.matmul(cond, node("final.adaln.w")),
                               node("final.adaln.b"));
    int shift = tape_.block(mod, 0, 0, 1, d_);
    int scale = tape_.block(mod, 0, d_, 1, d_);
    int lat_head = linear(modulate(tape_.layer_norm(lat_final, 1e-6), shift, scale),
                          "head.lattice.w", "head.lattice.b");
    int atom_head = linear(modulate(tape_.layer_norm(atom_final, 1e-6), shift, scale),
                           "head.atom.w", "head.atom.b");

    // Weighted epsilon regression.
    int lat_diff = tape_.sub(lat_head, tape_.constant(item.eps.lattice));
    int lat_loss = tape_.scale(tape_.sum_all(tape_.mul(lat_diff, lat_diff)), 1.0 / 9.0);

    Eigen::MatrixXd wrow(1, cfg.feature_dim());
    for (int c = 0; c < cfg.feature_dim(); ++c)
      wrow(0, c) = w_.channel_weights[static_cast<size_t>(c)];
    int atom_diff = tape_.sub(atom_head, tape_.constant(item.eps.atoms));
    int atom_sq = tape_.mul_rowvec(tape_.mul(atom_diff, atom_diff), tape_.constant(wrow));
    int atom_loss = tape_.scale(tape_.sum_all(atom_sq),
                                1.0 / (kMaxAtoms * cfg.feature_dim()));

    int total = tape_.add(lat_loss, tape_.scale(atom_loss, w_.lambda_atoms));
    return {total, lat_loss, atom_loss};
  }

 private:
  int node(const std::string& name) const {
    auto it = p_.index.find(name);
    if (it == p_.index.end())
      throw_data("unknown_parameter", "no parameter named '" + name + "'");
    return pnodes_[static_cast<size_t>(it->second)];
  }

  int linear(int x, const std::string& wname, const std::string& bname) {
    return tape_.add_rowvec(tape_.matmul(x, node(wname)), node(bname));
  }

  int modulate(int x, int shift, int scale) {
    return tape_.add_rowvec(tape_.mul_rowvec(x, tape_.add_scalar(scale, 1.0)), shift);
  }

  int conditioning(int t) {
    int feat = tape_.constant(time_features(t, d_));
    int h = tape_.gelu(linear(feat, "time.w1", "time.b1"));
    return tape_.gelu(linear(h, "time.w2", "time.b2"));
  }

  int attention(int q, int k, int v, int tq, int tk) {
    const int heads = p_.config.num_heads;
    const int dh = d_ / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    int out = -1;
    for (int h = 0; h < heads; ++h) {
      int qh = tape_.block(q, 0, h * dh, tq, dh);
      int kh = tape_.block(k, 0, h * dh, tk, dh);
      int vh = tape_.block(v, 0, h * dh, tk, dh);
      int scores = tape_.scale(tape_.matmul(qh, tape_.transpose(kh)), inv_sqrt);
      int soft = tape_.softmax_rows(scores);
      int oh = tape_.matmul(soft, vh);
      out = (h == 0) ? oh : tape_.hcat(out, oh);
    }
    return out;
  }

  int attn_qkv(int xq, int xkv, const std::string& prefix, int tq, int tk) {
    int q = linear(xq, prefix + "wq", prefix + "bq");
    int k = linear(xkv, prefix + "wk", prefix + "bk");
    int v = linear(xkv, prefix + "wv", prefix + "bv");
    return linear(attention(q, k, v, tq, tk), prefix + "wo", prefix + "bo");
  }

  int mlp(int x, const std::string& prefix) {
    int h = tape_.gelu(linear(x, prefix + "w1", prefix + "b1"));
    return linear(h, prefix + "w2", prefix + "b2");
  }

  struct Mod {
    int shift, scale, gate;
  };

  std::vector<Mod> chunk_mods(const std::string& prefix, int cond, int groups) {
    int mod = tape_.add_rowvec(tape_.matmul(cond, node(prefix + "adaln.w")),
                               node(prefix + "adaln.b"));
    std::vector<Mod> out;
    out.reserve(static_cast<size_t>(groups));
    for (int i = 0; i < groups; ++i)
      out.push_back({tape_.block(mod, 0, (3 * i + 0) * d_, 1, d_),
                     tape_.block(mod, 0, (3 * i + 1) * d_, 1, d_),
                     tape_.block(mod, 0, (3 * i + 2) * d_, 1, d_)});
    return out;
  }

  int run_block(int x, const std::string& prefix, int cond) {
    int tokens = static_cast<int>(tape_.value(x).rows());
    auto m = chunk_mods(prefix, cond, 2);
    int attn_in = modulate(tape_.layer_norm(x, 1e-6), m[0].shift, m[0].scale);
    int attn_out = attn_qkv(attn_in, attn_in, prefix + "attn.", tokens, tokens);
    x = tape_.add(x, tape_.mul_rowvec(attn_out, m[0].gate));
    int mlp_in = modulate(tape_.layer_norm(x, 1e-6), m[1].shift, m[1].scale);
    x = tape_.add(x, tape_.mul_rowvec(mlp(mlp_in, prefix + "mlp."), m[1].gate));
    return x;
  }

  std::pair<int, int> run_joint(int a, int l, const std::string& prefix, int cond) {
    auto ma = chunk_mods(prefix + "a.", cond, 3);
    auto ml = chunk_mods(prefix + "l.", cond, 3);

    int a_in = modulate(tape_.layer_norm(a, 1e-6), ma[0].shift, ma[0].scale);
    int a1 = tape_.add(a, tape_.mul_rowvec(
                              attn_qkv(a_in, a_in, prefix + "a.self1.", kMaxAtoms, kMaxAtoms),
                              ma[0].gate));
    int l_in = modulate(tape_.layer_norm(l, 1e-6), ml[0].shift, ml[0].scale);
    int l1 = tape_.add(
        l, tape_.mul_rowvec(attn_qkv(l_in, l_in, prefix + "l.self1.", 3, 3), ml[0].gate));

    int a2 = tape_.add(
        a1, tape_.mul_rowvec(
                attn_qkv(modulate(tape_.layer_norm(a1, 1e-6), ma[1].shift, ma[1].scale),
                         tape_.layer_norm(l1, 1e-6), prefix + "a.cross.", kMaxAtoms, 3),
                ma[1].gate));
    int l2 = tape_.add(
        l1, tape_.mul_rowvec(
                attn_qkv(modulate(tape_.layer_norm(l1, 1e-6), ml[1].shift, ml[1].scale),
                         tape_.layer_norm(a1, 1e-6), prefix + "l.cross.", 3, kMaxAtoms),
                ml[1].gate));

    int a3 = modulate(tape_.layer_norm(a2, 1e-6), ma[2].shift, ma[2].scale);
    int a_fused = tape_.add(attn_qkv(a3, a3, prefix + "a.self2.", kMaxAtoms, kMaxAtoms),
                            mlp(a3, prefix + "a.mlp."));
    int a_out = tape_.add(a2, tape_.mul_rowvec(a_fused, ma[2].gate));

    int l3 = modulate(tape_.layer_norm(l2, 1e-6), ml[2].shift, ml[2].scale);
    int l_fused =
        tape_.add(attn_qkv(l3, l3, prefix + "l.self2.", 3, 3), mlp(l3, prefix + "l.mlp."));
    int l_out = tape_.add(l2, tape_.mul_rowvec(l_fused, ml[2].gate));
    return {a_out, l_out};
  }

  const ModelParameters& p_;
  const LossWeights& w_;
  int d_;
  ad::Tape tape_;
  std::vector<int> pnodes_;
};

struct BatchGraph {
  TapeModel model;
  int total_node = -1;
  LossBreakdown value;

  BatchGraph(const ModelParameters& params, std::span<const TrainItem> batch,
             const LossWeights& weights)
      : model(params, weights) {
    if (batch.empty()) throw_data("empty_input", "training batch is empty");
    for (const auto& item : batch) {
      auto loss = model.item_loss(item);
      total_node = (total_node < 0) ? loss.total : model.tape().add(total_node, loss.total);
      value.lattice += model.tape().value(loss.lattice)(0, 0);
      value.atoms += model.tape().value(loss.atoms)(0, 0);
    }
    total_node = model.tape().scale(total_node, 1.0 / static_cast<double>(batch.size()));
    value.lattice /= static_cast<double>(batch.size());
    value.atoms /= static_cast<double>(batch.size());
    value.total = model.tape().value(total_node)(0, 0);
  }
};

}  // namespace

std::vector<TrainItem> make_train_items(std::span<const CrystalTensor> data,
                                        std::span<const int> indices,
                                        const NoiseSchedule& sched, Rng& rng) {
  std::vector<TrainItem> items;
  items.reserve(indices.size());
  for (int idx : indices) {
    const CrystalTensor& x0 = data[static_cast<size_t>(idx)];
    TrainItem item;
    item.t = static_cast<int>(rng.uniform_int(1, sched.steps));
    item.eps = gaussian_like(x0.mode, rng);
    item.xt = q_sample(x0, item.t, item.eps, sched);
    items.push_back(std::move(item));
  }
  return items;
}

LossBreakdown loss_and_gradients(ModelParameters& params, std::span<const TrainItem> batch,
                                 const LossWeights& weights) {
  BatchGraph graph(params, batch, weights);
  graph.model.tape().backward(graph.total_node);
  if (!std::isfinite(graph.value.total))
    throw_numeric("non_finite", "training loss is not finite");
  for (size_t i = 0; i < params.layout.size(); ++i) {
    params.grads[i] = graph.model.tape().grad(graph.model.pnode(i));
    if (!params.grads[i].allFinite())
      throw_numeric("non_finite", "gradient for '" + params.layout[i].name + "' is not finite");
  }
  return graph.value;
}

LossBreakdown loss_value(const ModelParameters& params, std::span<const TrainItem> batch,
                         const LossWeights& weights) {
  BatchGraph graph(params, batch, weights);
  return graph.value;
}

AdamState AdamState::init(const ModelParameters& params) {
  AdamState s;
  s.m.reserve(params.values.size());
  s.v.reserve(params.values.size());
  for (const auto& val : params.values) {
    s.m.push_back(Eigen::MatrixXd::Zero(val.rows(), val.cols()));
    s.v.push_back(Eigen::MatrixXd::Zero(val.rows(), val.cols()));
  }
  return s;
}

void adam_step(ModelParameters& params, AdamState& state, const AdamConfig& cfg) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.values.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * params.grads[i];
    state.v[i] = cfg.beta2 * state.v[i].array() +
                 (1.0 - cfg.beta2) * params.grads[i].array().square();
    Eigen::ArrayXXd mhat = state.m[i].array() / bc1;
    Eigen::ArrayXXd vhat = state.v[i].array() / bc2;
    params.values[i].array() -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
  }
}

std::vector<LossBreakdown> train(ModelParameters& params,
                                 const std::vector<CrystalTensor>& data,
                                 const NoiseSchedule& sched, const LossWeights& weights,
                                 const TrainOptions& opts) {
  if (data.empty()) throw_data("empty_dataset", "cannot train on an empty dataset");
  if (opts.epochs < 1 || opts.batch_size < 1)
    throw_usage("invalid_config", "epochs and batch_size must be positive");

  Rng rng(opts.seed);
  AdamState adam = AdamState::init(params);
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<LossBreakdown> history;
  history.reserve(static_cast<size_t>(opts.epochs));

  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i) {  // Fisher-Yates
      size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    LossBreakdown epoch_loss;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += opts.batch_size) {
      size_t end = std::min(order.size(), start + static_cast<size_t>(opts.batch_size));
      std::span<const int> idx(order.data() + start, end - start);
      auto items = make_train_items(data, idx, sched, rng);
      LossBreakdown loss = loss_and_gradients(params, items, weights);
      adam_step(params, adam, opts.adam);
      epoch_loss.total += loss.total;
      epoch_loss.lattice += loss.lattice;
      epoch_loss.atoms += loss.atoms;
      ++batches;
    }
    epoch_loss.total /= batches;
    epoch_loss.lattice /= batches;
    epoch_loss.atoms /= batches;
    history.push_back(epoch_loss);
    if (opts.on_epoch) opts.on_epoch(epoch, epoch_loss);
    if (opts.checkpoint_every > 0 && opts.on_checkpoint &&
        (epoch % opts.checkpoint_every == 0 || epoch == opts.epochs))
      opts.on_checkpoint(epoch, params);
  }
  return history;
}

}  // namespace xtal
