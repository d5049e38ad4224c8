#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "infnet/autodiff.hpp"
#include "infnet/checkpoint.hpp"
#include "infnet/rng.hpp"
#include "infnet/sampler.hpp"

namespace infnet {

enum class SeqEncoder { None, Mean, Gru, SelfAttn };

std::string to_string(SeqEncoder e);
SeqEncoder seq_encoder_from_string(const std::string& s);

struct ModelConfig {
    int hidden = 64;            // c
    int structural_layers = 2;  // K1
    int diffusion_layers = 2;   // K2
    SeqEncoder encoder = SeqEncoder::SelfAttn;
    bool use_edge_attention = true;
    bool use_structural_block = true;
    bool mask_user_features = false;     // zero the purchase-history part of Attr(u)
    bool mask_item_features = false;     // zero Attr(p) in the output head
    bool mask_taocode_features = false;  // zero all edge features

    void validate() const;
    std::string serialize() const;
    static ModelConfig deserialize(const std::string& text);
};

constexpr double kLeakySlope = 0.2;

template <class Real>
struct ModelParams {
    // shared embedding of node attributes, used by both blocks
    Tensor<Real> node_w, node_b;

    struct StructuralLayer {
        Tensor<Real> w_self, w_nbr;  // [c, c]
        Tensor<Real> attn;           // [2c], split as [self | neighbor]
        Tensor<Real> bias;           // [c]
    };
    std::vector<StructuralLayer> structural;

    struct DiffusionLayer {
        Tensor<Real> edge_w;            // [c, B] shared edge embedding
        Tensor<Real> attn_in, attn_out; // [3c] attention weight vectors
        Tensor<Real> proj_w, proj_b;    // [c, 2c], [c]: combine [In | Out] -> c
    };
    std::vector<DiffusionLayer> diffusion;

    GruCellParams<Real> gru;        // encoder == Gru
    SelfAttentionParams<Real> attn; // encoder == SelfAttn
    Tensor<Real> readout_attn;      // [c], SelfAttn readout weights
    Tensor<Real> readout_pos;       // [W, 1], readout bias by distance from the end

    Tensor<Real> head_w;  // [4c + item_dim]
    Tensor<Real> head_b;  // [1]

    static ModelParams init(const ModelConfig& cfg, int node_dim, int edge_dim, Rng& rng);

    std::vector<std::pair<std::string, Tensor<Real>>> named() const;
    std::vector<Tensor<Real>> all() const;
    std::size_t count() const;
    // deep copy; trainable copies keep requires_grad, frozen copies drop it
    ModelParams copy_with(bool requires_grad) const;
    ModelParams clone() const { return copy_with(true); }
    ModelParams frozen_clone() const { return copy_with(false); }
    void zero_grads();
    void save(Checkpoint& ck) const;
    void restore(const Checkpoint& ck);
};

// The InfNet forward pass over one query subgraph. Parameters are held by
// reference; one model instance can be shared by concurrent readers as long
// as parameter values are not mutated mid-forward.
template <class Real>
class InfNetModel {
public:
    InfNetModel(ModelConfig cfg, ModelParams<Real> params)
        : cfg_(std::move(cfg)), params_(std::move(params)) {}

    const ModelConfig& config() const { return cfg_; }
    ModelParams<Real>& params() { return params_; }
    const ModelParams<Real>& params() const { return params_; }

    // introspection of one forward pass, used by invariant tests
    struct DiffusionTrace {
        // attention weights in edge order with their segment ids, per
        // (layer, step) flattened layer-major
        std::vector<std::vector<double>> in_weights, out_weights;
        std::vector<std::vector<std::uint32_t>> in_segs, out_segs;
        // encoded states h^{k,t}_u: [layer][step][node][dim]
        std::vector<std::vector<std::vector<std::vector<double>>>> states;
    };

    // structural embeddings s_u for every local node, over the undirected
    // union of all steps in the subgraph
    std::vector<Tensor<Real>> structural_block(Tape<Real>& tape, const QuerySubgraph& sg) const;

    // dynamic embeddings d_u for every local node
    std::vector<Tensor<Real>> diffusion_block(Tape<Real>& tape, const QuerySubgraph& sg,
                                              DiffusionTrace* trace = nullptr) const;

    // purchase probability for the subgraph's query
    Tensor<Real> predict(Tape<Real>& tape, const QuerySubgraph& sg) const;

    // value-only convenience (no gradients recorded)
    Real score(const QuerySubgraph& sg) const;

    // diagnostic access: per-step per-layer states of the last forward are
    // not retained; tests drive the public blocks directly.

private:
    struct StepEdgesView;
    Tensor<Real> embed_node(Tape<Real>& tape, const QuerySubgraph& sg, std::size_t local) const;
    std::vector<Tensor<Real>> encode_sequence(Tape<Real>& tape,
                                              std::span<const Tensor<Real>> seq) const;
    Tensor<Real> readout(Tape<Real>& tape, std::span<const Tensor<Real>> seq) const;

    ModelConfig cfg_;
    ModelParams<Real> params_;
};

// mean binary cross-entropy over a batch of (prediction, label) pairs
template <class Real>
Tensor<Real> batch_loss(Tape<Real>& tape, std::span<const Tensor<Real>> preds,
                        std::span<const std::uint8_t> labels) {
    check(preds.size() == labels.size(), "batch_loss: size mismatch");
    auto yhat = concat(tape, preds);
    std::vector<Real> y(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) y[i] = Real(labels[i]);
    return binary_cross_entropy(tape, yhat, y);
}

using ModelParamsD = ModelParams<double>;
using ModelParamsF = ModelParams<float>;

extern template struct ModelParams<float>;
extern template struct ModelParams<double>;
extern template class InfNetModel<float>;
extern template class InfNetModel<double>;

}  // namespace infnet
