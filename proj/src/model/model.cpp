#include "stgcgrn/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "stgcgrn/errors.hpp"
#include "stgcgrn/ops.hpp"

namespace stgcgrn::model {
namespace {

Tensor uniform(const Shape& shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(shape, std::move(v), true);
}

Tensor zeros_param(const Shape& shape) { return Tensor::zeros(shape, true); }

GateBranches random_branches(std::size_t d_in, std::size_t d_out, std::size_t K, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
  GateBranches g;
  g.pre = uniform({(K + 1) * d_in, d_out}, bound, rng);
  g.adp = uniform({(K + 1) * d_in, d_out}, bound, rng);
  g.bias = zeros_param({d_out});
  return g;
}

// Frame `step` of a [B x T x N x C] tensor as [(B*N) x C].
Tensor time_frame(const Tensor& x, std::size_t step) {
  const std::size_t b = x.dim(0), t = x.dim(1), n = x.dim(2), c = x.dim(3);
  const std::size_t frame = n * c;
  std::vector<double> v(b * frame);
  auto src = x.values();
  for (std::size_t i = 0; i < b; ++i)
    std::copy_n(src.begin() + (i * t + step) * frame, frame, v.begin() + i * frame);
  return Tensor({b * n, c}, std::move(v));
}

// Frame `step` of every periodic block, stacked block-major:
// rows [j*B*N, (j+1)*B*N) belong to block j (D blocks first, then W).
Tensor periodic_frame(const Batch& batch, std::size_t step) {
  std::vector<double> v;
  std::size_t rows = 0, c = 0;
  for (const Tensor* src : {&batch.D, &batch.W}) {
    if (!src->defined()) continue;
    const std::size_t b = src->dim(0), blocks = src->dim(1), t = src->dim(2), n = src->dim(3);
    c = src->dim(4);
    const std::size_t frame = n * c;
    auto sv = src->values();
    for (std::size_t j = 0; j < blocks; ++j)
      for (std::size_t i = 0; i < b; ++i) {
        const auto it = sv.begin() + ((i * blocks + j) * t + step) * frame;
        v.insert(v.end(), it, it + frame);
        rows += n;
      }
  }
  return Tensor({rows, c}, std::move(v));
}

}  // namespace

std::string to_string(LayerOrder order) {
  return order == LayerOrder::attention_then_dgc ? "attention_then_dgc" : "dgc_then_attention";
}

LayerOrder parse_layer_order(const std::string& text) {
  if (text == "attention_then_dgc") return LayerOrder::attention_then_dgc;
  if (text == "dgc_then_attention") return LayerOrder::dgc_then_attention;
  throw ConfigError("model.order must be attention_then_dgc or dgc_then_attention, got '" + text + "'");
}

std::string Ablation::label() const {
  std::string out;
  auto add = [&](bool flag, const char* name) {
    if (!flag) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  add(no_pre, "no_pre");
  add(no_adp, "no_adp");
  add(no_window, "no_window");
  add(no_period, "no_period");
  return out.empty() ? "full" : out;
}

Ablation Ablation::parse(const std::string& text) {
  Ablation a;
  if (text.empty() || text == "full") return a;
  std::string token;
  std::istringstream is(text);
  while (std::getline(is, token, '+')) {
    std::istringstream inner(token);
    std::string part;
    while (std::getline(inner, part, '&')) {
      if (part == "no_pre")
        a.no_pre = true;
      else if (part == "no_adp")
        a.no_adp = true;
      else if (part == "no_pre_adp") {
        a.no_pre = true;
        a.no_adp = true;
      } else if (part == "no_window")
        a.no_window = true;
      else if (part == "no_period")
        a.no_period = true;
      else
        throw ConfigError("unknown ablation '" + part + "'");
    }
  }
  return a;
}

data::DatasetSpec ModelConfig::dataset_spec() const {
  data::DatasetSpec spec;
  spec.P = P;
  spec.Q = Q;
  spec.S = S;
  spec.d_count = d_count;
  spec.w_count = w_count;
  return spec;
}

void validate(const ModelConfig& cfg) {
  if (cfg.n_nodes == 0) throw ConfigError("model.n_nodes must be positive");
  if (cfg.channels == 0) throw ConfigError("model.channels must be positive");
  if (cfg.d_h == 0) throw ConfigError("model.d_h must be >= 1");
  if (cfg.d_e == 0) throw ConfigError("model.d_e must be >= 1");
  if (cfg.n_head == 0) throw ConfigError("model.n_head must be >= 1");
  if (cfg.K == 0) throw ConfigError("model.K must be >= 1");
  if (!(cfg.w_pre >= 0.0)) throw ConfigError("model.w_pre must be >= 0");
  if (!(cfg.w_adp >= 0.0)) throw ConfigError("model.w_adp must be >= 0");
  if (cfg.P == 0 || cfg.Q == 0) throw ConfigError("data.P and data.Q must be positive");
  if (cfg.d_count + cfg.w_count > 0 && cfg.S > cfg.P) throw ConfigError("data.S must not exceed data.P");
  if (cfg.l_w != 7 * cfg.l_d) throw ConfigError("data.samples_per_week must equal 7 * samples_per_day");
}

GruParams GruParams::random(std::size_t input, std::size_t hidden, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  GruParams p;
  p.w_zr = uniform({input + hidden, 2 * hidden}, bound, rng);
  p.b_zr = zeros_param({2 * hidden});
  p.w_c = uniform({input + hidden, hidden}, bound, rng);
  p.b_c = zeros_param({hidden});
  return p;
}

AttentionParams AttentionParams::random(std::size_t d_h, std::size_t d_a, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_h));
  AttentionParams p;
  p.w1 = uniform({d_h, d_a}, bound, rng);
  p.w2 = uniform({d_h, d_a}, bound, rng);
  p.b = zeros_param({d_a});
  p.v = uniform({d_a, 1}, 1.0 / std::sqrt(static_cast<double>(d_a)), rng);
  return p;
}

DgcgruParams DgcgruParams::random(std::size_t d_h, std::size_t K, std::mt19937_64& rng) {
  DgcgruParams p;
  p.zr = random_branches(2 * d_h, 2 * d_h, K, rng);
  p.cand = random_branches(2 * d_h, d_h, K, rng);
  return p;
}

ModelState ModelState::init(const ModelConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  std::mt19937_64 rng(seed);
  ModelState s;
  s.encoder = GruParams::random(cfg.channels, cfg.d_h, rng);
  s.decoder = GruParams::random(cfg.channels, cfg.d_h, rng);
  s.attention = AttentionParams::random(cfg.d_h, cfg.attention_width(), rng);
  s.dgcgru = DgcgruParams::random(cfg.d_h, cfg.K, rng);
  s.embeddings = graph::NodeEmbeddings::random(cfg.n_nodes, cfg.n_head, cfg.d_e, rng);
  s.output.w = uniform({cfg.d_h, cfg.channels}, 1.0 / std::sqrt(static_cast<double>(cfg.d_h)), rng);
  s.output.b = zeros_param({cfg.channels});
  return s;
}

std::vector<std::pair<std::string, Tensor>> ModelState::named_parameters() const {
  return {
      {"encoder.w_zr", encoder.w_zr},       {"encoder.b_zr", encoder.b_zr},
      {"encoder.w_c", encoder.w_c},         {"encoder.b_c", encoder.b_c},
      {"decoder.w_zr", decoder.w_zr},       {"decoder.b_zr", decoder.b_zr},
      {"decoder.w_c", decoder.w_c},         {"decoder.b_c", decoder.b_c},
      {"attention.w1", attention.w1},       {"attention.w2", attention.w2},
      {"attention.b", attention.b},         {"attention.v", attention.v},
      {"dgcgru.zr.pre", dgcgru.zr.pre},     {"dgcgru.zr.adp", dgcgru.zr.adp},
      {"dgcgru.zr.bias", dgcgru.zr.bias},   {"dgcgru.cand.pre", dgcgru.cand.pre},
      {"dgcgru.cand.adp", dgcgru.cand.adp}, {"dgcgru.cand.bias", dgcgru.cand.bias},
      {"embedding.e1", embeddings.e1},      {"embedding.e2", embeddings.e2},
      {"output.w", output.w},               {"output.b", output.b},
  };
}

std::vector<Tensor> ModelState::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

ModelState ModelState::deep_copy() const {
  auto param = [](const Tensor& t) { return t.clone().set_requires_grad(true); };
  ModelState s;
  s.encoder = {param(encoder.w_zr), param(encoder.b_zr), param(encoder.w_c), param(encoder.b_c)};
  s.decoder = {param(decoder.w_zr), param(decoder.b_zr), param(decoder.w_c), param(decoder.b_c)};
  s.attention = {param(attention.w1), param(attention.w2), param(attention.b), param(attention.v)};
  s.dgcgru.zr = {param(dgcgru.zr.pre), param(dgcgru.zr.adp), param(dgcgru.zr.bias)};
  s.dgcgru.cand = {param(dgcgru.cand.pre), param(dgcgru.cand.adp), param(dgcgru.cand.bias)};
  s.embeddings = {param(embeddings.e1), param(embeddings.e2)};
  s.output = {param(output.w), param(output.b)};
  return s;
}

void ModelState::copy_values_from(const ModelState& other) {
  auto dst = named_parameters();
  auto src = other.named_parameters();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].second.shape() != src[i].second.shape())
      throw ShapeError("parameter " + dst[i].first + " shape mismatch");
    auto d = dst[i].second.mutable_values();
    auto s = src[i].second.values();
    std::copy(s.begin(), s.end(), d.begin());
  }
}

Batch make_batch(const std::vector<const data::TrainingSample*>& samples) {
  if (samples.empty()) throw std::invalid_argument("make_batch: no samples");
  auto stack = [&](auto member) -> Tensor {
    const Tensor& first = samples.front()->*member;
    if (!first.defined()) return {};
    Shape shape{samples.size()};
    shape.insert(shape.end(), first.shape().begin(), first.shape().end());
    std::vector<double> v;
    v.reserve(shape_numel(shape));
    for (const auto* s : samples) {
      const Tensor& t = s->*member;
      if (t.shape() != first.shape()) throw ShapeError("make_batch: samples differ in shape");
      v.insert(v.end(), t.values().begin(), t.values().end());
    }
    return Tensor(shape, std::move(v));
  };
  Batch b;
  b.R = stack(&data::TrainingSample::R);
  b.D = stack(&data::TrainingSample::D);
  b.W = stack(&data::TrainingSample::W);
  b.Y = stack(&data::TrainingSample::Y);
  return b;
}

GraphContext make_graph_context(const Tensor& a_pre, const graph::NodeEmbeddings& emb, const ModelConfig& cfg) {
  GraphContext ctx;
  ctx.pre_powers.resize(cfg.K);
  ctx.adp_powers.resize(cfg.K);
  const auto& ab = cfg.ablation;
  if (ab.no_pre && ab.no_adp) return ctx;  // both branches on the identity graph
  ctx.use_pre = !ab.no_pre;
  ctx.use_adp = !ab.no_adp;

  if (ctx.use_pre) {
    if (a_pre.shape() != Shape{cfg.n_nodes, cfg.n_nodes})
      throw ShapeError("predefined adjacency " + shape_str(a_pre.shape()) + " does not match " +
                       std::to_string(cfg.n_nodes) + " nodes");
    ctx.pre_powers[0] = a_pre;
    for (std::size_t k = 1; k < cfg.K; ++k) ctx.pre_powers[k] = ops::matmul(ctx.pre_powers[k - 1], a_pre);
  }
  if (ctx.use_adp) {
    // mean_h (A_h^k x) = (mean_h A_h^k) x, so the head average is taken on the powers.
    const double inv_heads = 1.0 / static_cast<double>(emb.n_head());
    std::vector<Tensor> sums(cfg.K);
    for (std::size_t h = 0; h < emb.n_head(); ++h) {
      const Tensor a = graph::adaptive_adjacency(emb, h).matrix;
      Tensor power = a;
      for (std::size_t k = 0; k < cfg.K; ++k) {
        if (k > 0) power = ops::matmul(power, a);
        sums[k] = sums[k].defined() ? ops::add(sums[k], power) : power;
      }
    }
    for (std::size_t k = 0; k < cfg.K; ++k) ctx.adp_powers[k] = ops::affine(sums[k], inv_heads);
  }
  return ctx;
}

Tensor gru_cell(const GruParams& p, const Tensor& x, const Tensor& h) {
  const std::size_t hidden = p.hidden_width();
  if (x.rank() != 2 || h.rank() != 2 || x.dim(0) != h.dim(0) || x.dim(1) != p.input_width() || h.dim(1) != hidden)
    throw ShapeError("gru_cell: input " + shape_str(x.shape()) + " / state " + shape_str(h.shape()) +
                     " do not fit parameters (" + std::to_string(p.input_width()) + " -> " +
                     std::to_string(hidden) + ")");
  const Tensor zr = ops::sigmoid(ops::add(ops::matmul(ops::concat({x, h}, 1), p.w_zr), p.b_zr));
  const Tensor z = ops::slice(zr, 1, 0, hidden);
  const Tensor r = ops::slice(zr, 1, hidden, 2 * hidden);
  const Tensor c = ops::tanh(ops::add(ops::matmul(ops::concat({x, ops::mul(r, h)}, 1), p.w_c), p.b_c));
  return ops::add(ops::mul(ops::affine(z, -1.0, 1.0), h), ops::mul(z, c));
}

Tensor double_graph_conv(const GraphContext& ctx, const Tensor& x, const Tensor& pre_stack, const Tensor& adp_stack,
                         const ModelConfig& cfg) {
  auto branch = [&](const std::vector<Tensor>& powers, const Tensor& stack) {
    std::vector<Tensor> hops{x};
    for (const auto& p : powers) hops.push_back(p.defined() ? ops::propagate(p, x) : x);
    const Tensor features = ops::concat(hops, 1);
    if (features.dim(1) != stack.dim(0))
      throw ShapeError("double_graph_conv: features " + shape_str(features.shape()) + " vs weights " +
                       shape_str(stack.shape()));
    return ops::matmul(features, stack);
  };
  // A branch left alone by an ablation carries the full weight.
  const bool both = ctx.use_pre && ctx.use_adp;
  Tensor out;
  if (ctx.use_pre) out = ops::affine(branch(ctx.pre_powers, pre_stack), both ? cfg.w_pre : 1.0);
  if (ctx.use_adp) {
    Tensor adp = ops::affine(branch(ctx.adp_powers, adp_stack), both ? cfg.w_adp : 1.0);
    out = out.defined() ? ops::add(out, adp) : adp;
  }
  return out;
}

Tensor dgcgru_cell(const DgcgruParams& p, const GraphContext& ctx, const Tensor& x, const Tensor& h,
                   const ModelConfig& cfg) {
  const std::size_t hidden = cfg.d_h;
  if (x.rank() != 2 || h.rank() != 2 || x.dim(0) != h.dim(0) || x.dim(1) != hidden || h.dim(1) != hidden)
    throw ShapeError("dgcgru_cell: input " + shape_str(x.shape()) + " / state " + shape_str(h.shape()) +
                     " expected width " + std::to_string(hidden));
  const Tensor zr =
      ops::sigmoid(ops::add(double_graph_conv(ctx, ops::concat({x, h}, 1), p.zr.pre, p.zr.adp, cfg), p.zr.bias));
  const Tensor z = ops::slice(zr, 1, 0, hidden);
  const Tensor r = ops::slice(zr, 1, hidden, 2 * hidden);
  const Tensor gated = ops::concat({x, ops::mul(r, h)}, 1);
  const Tensor c = ops::tanh(ops::add(double_graph_conv(ctx, gated, p.cand.pre, p.cand.adp, cfg), p.cand.bias));
  return ops::add(ops::mul(ops::affine(z, -1.0, 1.0), h), ops::mul(z, c));
}

Encoding encode(const GruParams& encoder, const AttentionParams& attention, const Batch& batch,
                const ModelConfig& cfg) {
  const std::size_t b = batch.size();
  const std::size_t rows = b * cfg.n_nodes;
  if (batch.R.shape() != Shape{b, cfg.P, cfg.n_nodes, cfg.channels})
    throw ShapeError("encode: recent segment " + shape_str(batch.R.shape()) + " does not match config");
  Encoding enc;
  Tensor h = Tensor::zeros({rows, cfg.d_h});
  for (std::size_t s = 0; s < cfg.P; ++s) h = gru_cell(encoder, time_frame(batch.R, s), h);
  enc.init_state = h;

  const std::size_t blocks = cfg.periodic_blocks();
  if (blocks == 0) return enc;
  const std::size_t len = cfg.block_len();
  const Shape block_shape{b, 0, len, cfg.n_nodes, cfg.channels};
  for (auto [src, count] : {std::pair{&batch.D, cfg.d_count}, std::pair{&batch.W, cfg.w_count}}) {
    if (count == 0) continue;
    Shape want = block_shape;
    want[1] = count;
    if (!src->defined() || src->shape() != want)
      throw ShapeError("encode: periodic segment does not match " + shape_str(want));
  }

  const std::size_t half = cfg.attention_half_width();
  const std::size_t lo = cfg.P - half, hi = cfg.P + cfg.Q - 1 + half;
  enc.banks.assign(blocks, std::vector<Tensor>(len));
  enc.keys.assign(blocks, std::vector<Tensor>(len));
  Tensor hp = Tensor::zeros({blocks * rows, cfg.d_h});
  for (std::size_t s = 0; s < len; ++s) {
    hp = gru_cell(encoder, periodic_frame(batch, s), hp);
    Tensor keys;
    if (s >= lo && s <= hi) keys = ops::matmul(hp, attention.w2);
    for (std::size_t j = 0; j < blocks; ++j) {
      enc.banks[j][s] = blocks == 1 ? hp : ops::slice(hp, 0, j * rows, (j + 1) * rows);
      if (keys.defined()) enc.keys[j][s] = blocks == 1 ? keys : ops::slice(keys, 0, j * rows, (j + 1) * rows);
    }
  }
  return enc;
}

AttentionResult attention_step(const AttentionParams& params, const Tensor& query, const Encoding& enc,
                               std::size_t step, const ModelConfig& cfg) {
  if (step >= cfg.Q)
    throw std::out_of_range("attention_step: step " + std::to_string(step) + " outside [0, " +
                            std::to_string(cfg.Q) + ")");
  if (enc.banks.empty()) return {query, Tensor{}};
  const std::size_t rows = query.dim(0);
  const std::size_t half = cfg.attention_half_width();
  const std::size_t centre = cfg.P + step;
  std::vector<Tensor> values, keys;
  for (std::size_t j = 0; j < enc.banks.size(); ++j)
    for (std::size_t s = centre - half; s <= centre + half; ++s) {
      values.push_back(enc.banks[j][s]);
      keys.push_back(enc.keys[j][s]);
    }
  const std::size_t m = values.size();

  // score_p = v^T tanh(W1 h + W2 h_p + b), all candidates stacked row-wise
  const Tensor q = ops::add(ops::matmul(query, params.w1), params.b);
  const Tensor hidden = ops::tanh(ops::add(ops::concat(std::vector<Tensor>(m, q), 0), ops::concat(keys, 0)));
  const Tensor scores = ops::transpose(ops::reshape(ops::matmul(hidden, params.v), {m, rows}));
  const Tensor weights = ops::softmax(scores, 1);  // [rows x m]
  const Tensor flat = ops::reshape(ops::transpose(weights), {m * rows});
  const Tensor weighted = ops::scale_rows(ops::concat(values, 0), flat);
  const std::size_t d = query.dim(1);
  const Tensor context = ops::reshape(ops::sum(ops::reshape(weighted, {m, rows * d}), 0), {rows, d});
  return {ops::add(query, context), weights};
}

ForwardTrace forward(const Batch& batch, const ModelState& state, const ModelConfig& cfg, const Tensor& a_pre,
                     bool teacher_forcing) {
  const std::size_t b = batch.size(), n = cfg.n_nodes, c = cfg.channels;
  const GraphContext ctx = make_graph_context(a_pre, state.embeddings, cfg);
  ForwardTrace trace;
  trace.encoding = encode(state.encoder, state.attention, batch, cfg);

  Tensor x = time_frame(batch.R, cfg.P - 1);
  Tensor h = trace.encoding.init_state;
  Tensor g = Tensor::zeros({b * n, cfg.d_h});
  std::vector<Tensor> steps;
  for (std::size_t t = 0; t < cfg.Q; ++t) {
    h = gru_cell(state.decoder, x, h);
    trace.decoder_hidden.push_back(h);
    Tensor out;
    if (cfg.order == LayerOrder::attention_then_dgc) {
      AttentionResult att = attention_step(state.attention, h, trace.encoding, t, cfg);
      trace.attention_output.push_back(att.output);
      if (att.weights.defined()) trace.attention_weights.push_back(att.weights);
      g = dgcgru_cell(state.dgcgru, ctx, att.output, g, cfg);
      out = g;
    } else {
      g = dgcgru_cell(state.dgcgru, ctx, h, g, cfg);
      AttentionResult att = attention_step(state.attention, g, trace.encoding, t, cfg);
      trace.attention_output.push_back(att.output);
      if (att.weights.defined()) trace.attention_weights.push_back(att.weights);
      out = att.output;
    }
    const Tensor y = ops::add(ops::matmul(out, state.output.w), state.output.b);  // [(B*N) x C]
    steps.push_back(ops::reshape(y, {b, 1, n * c}));
    x = teacher_forcing ? time_frame(batch.Y, t) : y;
  }
  trace.predictions = ops::reshape(ops::concat(steps, 1), {b, cfg.Q, n, c});
  return trace;
}

}  // namespace stgcgrn::model
