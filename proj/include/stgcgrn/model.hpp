#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "stgcgrn/data.hpp"
#include "stgcgrn/graph.hpp"
#include "stgcgrn/tensor.hpp"

namespace stgcgrn::model {

enum class LayerOrder { attention_then_dgc, dgc_then_attention };

std::string to_string(LayerOrder order);
LayerOrder parse_layer_order(const std::string& text);

struct Ablation {
  bool no_pre = false;
  bool no_adp = false;
  bool no_window = false;
  bool no_period = false;

  // "full" or a '+'-joined list such as "no_pre+no_adp".
  std::string label() const;
  static Ablation parse(const std::string& text);
  bool operator==(const Ablation&) const = default;
};

struct ModelConfig {
  std::size_t n_nodes = 0;
  std::size_t channels = 1;
  std::size_t d_h = 64;
  std::size_t d_e = 10;
  std::size_t n_head = 8;
  std::size_t K = 2;
  double w_pre = 0.1;
  double w_adp = 0.9;
  std::size_t P = 12;
  std::size_t Q = 12;
  std::size_t S = 3;
  std::size_t d_count = 1;
  std::size_t w_count = 1;
  std::size_t l_d = 288;
  std::size_t l_w = 2016;
  Ablation ablation;
  LayerOrder order = LayerOrder::attention_then_dgc;

  std::size_t L() const { return Q + S; }
  std::size_t block_len() const { return P + L(); }
  std::size_t attention_width() const { return d_h; }
  std::size_t periodic_blocks() const { return ablation.no_period ? 0 : d_count + w_count; }
  // Half-width used when attending; the window collapses to the aligned
  // position under no_window while the banks keep their full length.
  std::size_t attention_half_width() const { return ablation.no_window ? 0 : S; }
  std::size_t attention_candidates() const { return periodic_blocks() * (2 * attention_half_width() + 1); }

  data::DatasetSpec dataset_spec() const;
};

void validate(const ModelConfig& cfg);

// Standard GRU over [x (+) h]; update and reset gates share one matrix
// whose first d_h columns are the update gate.
struct GruParams {
  Tensor w_zr;  // [(in + h) x 2h]
  Tensor b_zr;  // [2h]
  Tensor w_c;   // [(in + h) x h]
  Tensor b_c;   // [h]

  std::size_t input_width() const { return w_zr.dim(0) - hidden_width(); }
  std::size_t hidden_width() const { return w_c.dim(1); }
  static GruParams random(std::size_t input, std::size_t hidden, std::mt19937_64& rng);
};

struct AttentionParams {
  Tensor w1;  // [d_h x d_a], applied to the query
  Tensor w2;  // [d_h x d_a], applied to bank states
  Tensor b;   // [d_a]
  Tensor v;   // [d_a x 1]
  static AttentionParams random(std::size_t d_h, std::size_t d_a, std::mt19937_64& rng);
};

// Hop weights W^0..W^K stacked vertically: [(K+1) * d_in x d_out].
struct GateBranches {
  Tensor pre;
  Tensor adp;
  Tensor bias;  // [d_out]
};

struct DgcgruParams {
  GateBranches zr;    // d_out = 2 d_h (update | reset)
  GateBranches cand;  // d_out = d_h
  static DgcgruParams random(std::size_t d_h, std::size_t K, std::mt19937_64& rng);
};

struct OutputParams {
  Tensor w;  // [d_h x C]
  Tensor b;  // [C]
};

struct ModelState {
  GruParams encoder;
  GruParams decoder;
  AttentionParams attention;
  DgcgruParams dgcgru;
  graph::NodeEmbeddings embeddings;
  OutputParams output;

  static ModelState init(const ModelConfig& cfg, std::uint64_t seed);
  // Fixed, deterministic order; names are stable checkpoint keys.
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  std::vector<Tensor> parameters() const;
  ModelState deep_copy() const;
  void copy_values_from(const ModelState& other);
};

// Model inputs for B samples (rows ordered batch-major, then node).
struct Batch {
  Tensor R;  // [B x P x N x C]
  Tensor D;  // [B x d_count x (P+L) x N x C], undefined when d_count == 0
  Tensor W;  // [B x w_count x (P+L) x N x C], undefined when w_count == 0
  Tensor Y;  // [B x Q x N x C]
  std::size_t size() const { return R.dim(0); }
};

Batch make_batch(const std::vector<const data::TrainingSample*>& samples);

// Propagation matrices for the two graph branches, powers 1..K. An
// undefined entry stands for the identity.
struct GraphContext {
  std::vector<Tensor> pre_powers;
  std::vector<Tensor> adp_powers;  // head-averaged powers of the adaptive graphs
  bool use_pre = true;
  bool use_adp = true;
};

GraphContext make_graph_context(const Tensor& a_pre, const graph::NodeEmbeddings& emb, const ModelConfig& cfg);

Tensor gru_cell(const GruParams& params, const Tensor& x, const Tensor& h);

// x: [(B*N) x d_in]. Returns w_pre * o_pre + w_adp * o_adp (without bias); a
// single surviving branch is returned unscaled.
Tensor double_graph_conv(const GraphContext& ctx, const Tensor& x, const Tensor& pre_stack, const Tensor& adp_stack,
                         const ModelConfig& cfg);

Tensor dgcgru_cell(const DgcgruParams& params, const GraphContext& ctx, const Tensor& x, const Tensor& h,
                   const ModelConfig& cfg);

struct Encoding {
  Tensor init_state;                        // [(B*N) x d_h]
  std::vector<std::vector<Tensor>> banks;   // [block][position] -> [(B*N) x d_h]
  std::vector<std::vector<Tensor>> keys;    // banks projected by w2; only window positions are filled
};

Encoding encode(const GruParams& encoder, const AttentionParams& attention, const Batch& batch,
                const ModelConfig& cfg);

struct AttentionResult {
  Tensor output;   // h_t + context, [(B*N) x d_h]
  Tensor weights;  // [(B*N) x candidates]
};

AttentionResult attention_step(const AttentionParams& params, const Tensor& query, const Encoding& enc,
                               std::size_t step, const ModelConfig& cfg);

struct ForwardTrace {
  Encoding encoding;
  std::vector<Tensor> decoder_hidden;     // per step
  std::vector<Tensor> attention_output;   // per step
  std::vector<Tensor> attention_weights;  // per step, empty under no_period
  Tensor predictions;                     // [B x Q x N x C]
};

// a_pre is the row-normalized predefined adjacency.
ForwardTrace forward(const Batch& batch, const ModelState& state, const ModelConfig& cfg, const Tensor& a_pre,
                     bool teacher_forcing = false);

}  // namespace stgcgrn::model
