#include "infnet/model.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>

namespace infnet {

std::string to_string(SeqEncoder e) {
    switch (e) {
        case SeqEncoder::None: return "none";
        case SeqEncoder::Mean: return "mean";
        case SeqEncoder::Gru: return "gru";
        case SeqEncoder::SelfAttn: return "self-attn";
    }
    return "?";
}

SeqEncoder seq_encoder_from_string(const std::string& s) {
    if (s == "none") return SeqEncoder::None;
    if (s == "mean") return SeqEncoder::Mean;
    if (s == "gru") return SeqEncoder::Gru;
    if (s == "self-attn" || s == "self_attn") return SeqEncoder::SelfAttn;
    fail("unknown sequence encoder '%s' (expected none|mean|gru|self-attn)", s.c_str());
}

void ModelConfig::validate() const {
    check(hidden >= 1, "model config: hidden size must be >= 1");
    check(structural_layers >= 1, "model config: structural depth must be >= 1");
    check(diffusion_layers >= 1, "model config: diffusion depth must be >= 1");
}

std::string ModelConfig::serialize() const {
    std::ostringstream os;
    os << "hidden=" << hidden << "\nstructural_layers=" << structural_layers
       << "\ndiffusion_layers=" << diffusion_layers << "\nencoder=" << to_string(encoder)
       << "\nedge_attention=" << int(use_edge_attention)
       << "\nstructural_block=" << int(use_structural_block)
       << "\nmask_user=" << int(mask_user_features) << "\nmask_item=" << int(mask_item_features)
       << "\nmask_taocode=" << int(mask_taocode_features) << "\n";
    return os.str();
}

ModelConfig ModelConfig::deserialize(const std::string& text) {
    ModelConfig cfg;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto eq = line.find('=');
        check(eq != std::string::npos, "model config: malformed line '" + line + "'");
        std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "hidden") cfg.hidden = std::stoi(val);
        else if (key == "structural_layers") cfg.structural_layers = std::stoi(val);
        else if (key == "diffusion_layers") cfg.diffusion_layers = std::stoi(val);
        else if (key == "encoder") cfg.encoder = seq_encoder_from_string(val);
        else if (key == "edge_attention") cfg.use_edge_attention = val != "0";
        else if (key == "structural_block") cfg.use_structural_block = val != "0";
        else if (key == "mask_user") cfg.mask_user_features = val != "0";
        else if (key == "mask_item") cfg.mask_item_features = val != "0";
        else if (key == "mask_taocode") cfg.mask_taocode_features = val != "0";
        else fail("model config: unknown key '%s'", key.c_str());
    }
    cfg.validate();
    return cfg;
}

namespace {

template <class Real>
Tensor<Real> xavier(std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out,
                    Rng& rng, bool requires_grad = true) {
    auto t = Tensor<Real>::zeros(std::move(shape), requires_grad);
    const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
    for (std::size_t i = 0; i < t.size(); ++i)
        t.set_value(i, Real(rng.uniform(-bound, bound)));
    return t;
}

template <class Real>
Tensor<Real> constant_vec(const std::vector<double>& v) {
    auto t = Tensor<Real>::zeros({v.size()});
    for (std::size_t i = 0; i < v.size(); ++i) t.set_value(i, Real(v[i]));
    return t;
}

}  // namespace

template <class Real>
ModelParams<Real> ModelParams<Real>::init(const ModelConfig& cfg, int node_dim, int edge_dim,
                                          Rng& rng) {
    cfg.validate();
    const std::size_t c = static_cast<std::size_t>(cfg.hidden);
    const std::size_t nd = static_cast<std::size_t>(node_dim);
    const std::size_t ed = static_cast<std::size_t>(edge_dim);
    ModelParams<Real> p;
    p.node_w = xavier<Real>({c, nd}, nd, c, rng);
    p.node_b = Tensor<Real>::zeros({c}, true);
    for (int k = 0; k < cfg.structural_layers; ++k) {
        StructuralLayer layer;
        layer.w_self = xavier<Real>({c, c}, c, c, rng);
        layer.w_nbr = xavier<Real>({c, c}, c, c, rng);
        layer.attn = xavier<Real>({2 * c}, 2 * c, 1, rng);
        layer.bias = Tensor<Real>::zeros({c}, true);
        p.structural.push_back(std::move(layer));
    }
    for (int k = 0; k < cfg.diffusion_layers; ++k) {
        DiffusionLayer layer;
        layer.edge_w = xavier<Real>({c, ed}, ed, c, rng);
        layer.attn_in = xavier<Real>({3 * c}, 3 * c, 1, rng);
        layer.attn_out = xavier<Real>({3 * c}, 3 * c, 1, rng);
        layer.proj_w = xavier<Real>({c, 2 * c}, 2 * c, c, rng);
        layer.proj_b = Tensor<Real>::zeros({c}, true);
        p.diffusion.push_back(std::move(layer));
    }
    if (cfg.encoder == SeqEncoder::Gru) {
        p.gru.wz = xavier<Real>({c, c}, c, c, rng);
        p.gru.wr = xavier<Real>({c, c}, c, c, rng);
        p.gru.wh = xavier<Real>({c, c}, c, c, rng);
        p.gru.uz = xavier<Real>({c, c}, c, c, rng);
        p.gru.ur = xavier<Real>({c, c}, c, c, rng);
        p.gru.uh = xavier<Real>({c, c}, c, c, rng);
        p.gru.bz = Tensor<Real>::zeros({c}, true);
        p.gru.br = Tensor<Real>::zeros({c}, true);
        p.gru.bh = Tensor<Real>::zeros({c}, true);
    }
    if (cfg.encoder == SeqEncoder::SelfAttn) {
        // identity query/key projections keep the scaled dot-product logits
        // parameter-free; the value projection and readout start at zero so
        // the encoder begins as the identity with a mean readout and learns
        // its mixing on top
        auto identity = [&]() {
            auto t = Tensor<Real>::zeros({c, c}, true);
            for (std::size_t i = 0; i < c; ++i) t.set_value(i * c + i, Real(1));
            return t;
        };
        p.attn.wq = identity();
        p.attn.wk = identity();
        p.attn.wv = Tensor<Real>::zeros({c, c}, true);
        p.attn.pos_bias = Tensor<Real>::zeros({8, 1}, true);
        p.readout_attn = Tensor<Real>::zeros({c}, true);
        p.readout_pos = Tensor<Real>::zeros({8, 1}, true);
    }
    p.head_w = xavier<Real>({4 * c + ed}, 4 * c + ed, 1, rng);
    p.head_b = Tensor<Real>::zeros({1}, true);
    return p;
}

template <class Real>
std::vector<std::pair<std::string, Tensor<Real>>> ModelParams<Real>::named() const {
    std::vector<std::pair<std::string, Tensor<Real>>> out;
    out.emplace_back("node.w", node_w);
    out.emplace_back("node.b", node_b);
    for (std::size_t k = 0; k < structural.size(); ++k) {
        auto base = "structural." + std::to_string(k) + ".";
        out.emplace_back(base + "w_self", structural[k].w_self);
        out.emplace_back(base + "w_nbr", structural[k].w_nbr);
        out.emplace_back(base + "attn", structural[k].attn);
        out.emplace_back(base + "bias", structural[k].bias);
    }
    for (std::size_t k = 0; k < diffusion.size(); ++k) {
        auto base = "diffusion." + std::to_string(k) + ".";
        out.emplace_back(base + "edge_w", diffusion[k].edge_w);
        out.emplace_back(base + "attn_in", diffusion[k].attn_in);
        out.emplace_back(base + "attn_out", diffusion[k].attn_out);
        out.emplace_back(base + "proj_w", diffusion[k].proj_w);
        out.emplace_back(base + "proj_b", diffusion[k].proj_b);
    }
    if (gru.wz.valid()) {
        out.emplace_back("encoder.gru.wz", gru.wz);
        out.emplace_back("encoder.gru.wr", gru.wr);
        out.emplace_back("encoder.gru.wh", gru.wh);
        out.emplace_back("encoder.gru.uz", gru.uz);
        out.emplace_back("encoder.gru.ur", gru.ur);
        out.emplace_back("encoder.gru.uh", gru.uh);
        out.emplace_back("encoder.gru.bz", gru.bz);
        out.emplace_back("encoder.gru.br", gru.br);
        out.emplace_back("encoder.gru.bh", gru.bh);
    }
    if (attn.wq.valid()) {
        out.emplace_back("encoder.attn.wq", attn.wq);
        out.emplace_back("encoder.attn.wk", attn.wk);
        out.emplace_back("encoder.attn.wv", attn.wv);
        out.emplace_back("encoder.attn.pos_bias", attn.pos_bias);
        out.emplace_back("encoder.readout", readout_attn);
        out.emplace_back("encoder.readout_pos", readout_pos);
    }
    out.emplace_back("head.w", head_w);
    out.emplace_back("head.b", head_b);
    return out;
}

template <class Real>
std::vector<Tensor<Real>> ModelParams<Real>::all() const {
    std::vector<Tensor<Real>> out;
    for (auto& [name, t] : named()) out.push_back(t);
    return out;
}

template <class Real>
std::size_t ModelParams<Real>::count() const {
    std::size_t n = 0;
    for (const auto& t : all()) n += t.size();
    return n;
}

template <class Real>
ModelParams<Real> ModelParams<Real>::copy_with(bool requires_grad) const {
    ModelParams<Real> out = *this;
    auto copy = [requires_grad](const Tensor<Real>& t) {
        if (!t.valid()) return t;
        return Tensor<Real>::from(t.shape(), t.values(), requires_grad);
    };
    out.node_w = copy(node_w);
    out.node_b = copy(node_b);
    for (auto& l : out.structural) {
        l.w_self = copy(l.w_self);
        l.w_nbr = copy(l.w_nbr);
        l.attn = copy(l.attn);
        l.bias = copy(l.bias);
    }
    for (auto& l : out.diffusion) {
        l.edge_w = copy(l.edge_w);
        l.attn_in = copy(l.attn_in);
        l.attn_out = copy(l.attn_out);
        l.proj_w = copy(l.proj_w);
        l.proj_b = copy(l.proj_b);
    }
    out.gru.wz = copy(gru.wz);
    out.gru.wr = copy(gru.wr);
    out.gru.wh = copy(gru.wh);
    out.gru.uz = copy(gru.uz);
    out.gru.ur = copy(gru.ur);
    out.gru.uh = copy(gru.uh);
    out.gru.bz = copy(gru.bz);
    out.gru.br = copy(gru.br);
    out.gru.bh = copy(gru.bh);
    out.attn.wq = copy(attn.wq);
    out.attn.wk = copy(attn.wk);
    out.attn.wv = copy(attn.wv);
    out.attn.pos_bias = copy(attn.pos_bias);
    out.readout_pos = copy(readout_pos);
    out.readout_attn = copy(readout_attn);
    out.head_w = copy(head_w);
    out.head_b = copy(head_b);
    return out;
}

template <class Real>
void ModelParams<Real>::zero_grads() {
    for (auto t : all()) t.zero_grad();
}

template <class Real>
void ModelParams<Real>::save(Checkpoint& ck) const {
    for (const auto& [name, t] : named()) checkpoint_add(ck, name, t);
}

template <class Real>
void ModelParams<Real>::restore(const Checkpoint& ck) {
    for (auto& [name, t] : named()) {
        auto tensor = t;
        checkpoint_restore(ck, name, tensor);
    }
}

// ---------------------------------------------------------------------------
// forward pass
// ---------------------------------------------------------------------------

template <class Real>
Tensor<Real> InfNetModel<Real>::embed_node(Tape<Real>& tape, const QuerySubgraph& sg,
                                           std::size_t local) const {
    std::vector<double> attr = sg.node_features[local];
    const std::size_t hist = attr.size() - FeatureConfig::role_width;
    // purchase histograms are unbounded counts; log-compress them so late
    // steps stay on the scale the embedding saw during training
    for (std::size_t i = 0; i < hist; ++i)
        attr[i] = cfg_.mask_user_features ? 0.0 : std::log1p(attr[i]);
    auto x = constant_vec<Real>(attr);
    return leaky_relu(tape, add(tape, matmul(tape, params_.node_w, x), params_.node_b),
                      Real(kLeakySlope));
}

template <class Real>
std::vector<Tensor<Real>> InfNetModel<Real>::structural_block(Tape<Real>& tape,
                                                              const QuerySubgraph& sg) const {
    const std::size_t n = sg.nodes.size();
    const std::size_t c = static_cast<std::size_t>(cfg_.hidden);

    // undirected union of all step edges, deduplicated
    std::vector<std::vector<std::uint32_t>> nbrs(n);
    for (const auto& step : sg.step_edges)
        for (const auto& e : step) {
            nbrs[e.src].push_back(e.dst);
            nbrs[e.dst].push_back(e.src);
        }
    for (auto& v : nbrs) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }

    std::vector<Tensor<Real>> x(n);
    for (std::size_t u = 0; u < n; ++u) x[u] = embed_node(tape, sg, u);

    for (const auto& layer : params_.structural) {
        std::vector<Tensor<Real>> sx(n), nx(n);
        for (std::size_t u = 0; u < n; ++u) {
            sx[u] = matmul(tape, layer.w_self, x[u]);
            nx[u] = matmul(tape, layer.w_nbr, x[u]);
        }
        std::vector<Tensor<Real>> logits;
        std::vector<Tensor<Real>> msgs;
        std::vector<std::uint32_t> segs;
        for (std::size_t u = 0; u < n; ++u)
            for (auto v : nbrs[u]) {
                logits.push_back(leaky_relu(
                    tape, dot(tape, layer.attn, concat(tape, {sx[u], nx[v]})), Real(kLeakySlope)));
                msgs.push_back(nx[v]);
                segs.push_back(static_cast<std::uint32_t>(u));
            }
        Tensor<Real> agg;
        if (!logits.empty()) {
            auto alpha =
                segment_softmax(tape, concat(tape, std::span<const Tensor<Real>>(logits)), segs);
            auto rows = stack_rows(tape, std::span<const Tensor<Real>>(msgs));
            agg = weighted_segment_sum(tape, alpha, rows, segs, n);
        }
        std::vector<Tensor<Real>> next(n);
        for (std::size_t u = 0; u < n; ++u) {
            auto combined = agg.valid() ? add(tape, sx[u], row(tape, agg, u)) : sx[u];
            next[u] = leaky_relu(tape, add(tape, combined, layer.bias), Real(kLeakySlope));
        }
        x = std::move(next);
    }
    (void)c;
    return x;
}

template <class Real>
std::vector<Tensor<Real>> InfNetModel<Real>::encode_sequence(
    Tape<Real>& tape, std::span<const Tensor<Real>> seq) const {
    switch (cfg_.encoder) {
        case SeqEncoder::None:
            return {seq.begin(), seq.end()};
        case SeqEncoder::Mean: {
            std::vector<Tensor<Real>> out(seq.size());
            for (std::size_t t = 0; t < seq.size(); ++t)
                out[t] = mean_over_steps(tape, seq.subspan(0, t + 1));
            return out;
        }
        case SeqEncoder::Gru: {
            std::vector<Tensor<Real>> out(seq.size());
            auto h = Tensor<Real>::zeros(seq.front().shape());
            for (std::size_t t = 0; t < seq.size(); ++t) {
                h = gru_cell(tape, seq[t], h, params_.gru);
                out[t] = h;
            }
            return out;
        }
        case SeqEncoder::SelfAttn: {
            // transformer-style residual: each step keeps its own state and
            // adds causal attention context
            auto mixed = masked_self_attention(tape, seq, params_.attn);
            std::vector<Tensor<Real>> out(seq.size());
            for (std::size_t t = 0; t < seq.size(); ++t) out[t] = add(tape, seq[t], mixed[t]);
            return out;
        }
    }
    fail("unreachable encoder");
}

template <class Real>
Tensor<Real> InfNetModel<Real>::readout(Tape<Real>& tape,
                                        std::span<const Tensor<Real>> seq) const {
    switch (cfg_.encoder) {
        case SeqEncoder::None:
        case SeqEncoder::Gru:
            return seq.back();
        case SeqEncoder::Mean:
            return mean_over_steps(tape, seq);
        case SeqEncoder::SelfAttn: {
            std::vector<Tensor<Real>> logits(seq.size());
            for (std::size_t t = 0; t < seq.size(); ++t) {
                logits[t] = dot(tape, params_.readout_attn, seq[t]);
                std::size_t from_end =
                    std::min(seq.size() - 1 - t, params_.readout_pos.dim(0) - 1);
                logits[t] = add(tape, logits[t], row(tape, params_.readout_pos, from_end));
            }
            std::vector<std::uint32_t> segs(seq.size(), 0);
            auto alpha = segment_softmax(
                tape, concat(tape, std::span<const Tensor<Real>>(logits)), segs);
            auto rows = stack_rows(tape, seq);
            return row(tape, weighted_segment_sum(tape, alpha, rows, segs, 1), 0);
        }
    }
    fail("unreachable encoder");
}

template <class Real>
std::vector<Tensor<Real>> InfNetModel<Real>::diffusion_block(Tape<Real>& tape,
                                                             const QuerySubgraph& sg,
                                                             DiffusionTrace* trace) const {
    const std::size_t n = sg.nodes.size();
    const std::size_t steps = sg.step_edges.size();
    const std::size_t c = static_cast<std::size_t>(cfg_.hidden);

    // per-step edge orderings: by receiver for In, by sender for Out
    struct StepIndex {
        std::vector<std::size_t> in_order, out_order;
        std::vector<std::uint32_t> in_segs, out_segs;
        std::vector<double> in_uniform, out_uniform;
    };
    std::vector<StepIndex> idx(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        const auto& edges = sg.step_edges[t];
        auto& ix = idx[t];
        ix.in_order.resize(edges.size());
        ix.out_order.resize(edges.size());
        for (std::size_t i = 0; i < edges.size(); ++i) ix.in_order[i] = ix.out_order[i] = i;
        std::sort(ix.in_order.begin(), ix.in_order.end(), [&](std::size_t a, std::size_t b) {
            return std::tie(edges[a].dst, edges[a].src) < std::tie(edges[b].dst, edges[b].src);
        });
        std::sort(ix.out_order.begin(), ix.out_order.end(), [&](std::size_t a, std::size_t b) {
            return std::tie(edges[a].src, edges[a].dst) < std::tie(edges[b].src, edges[b].dst);
        });
        ix.in_segs.resize(edges.size());
        ix.out_segs.resize(edges.size());
        for (std::size_t i = 0; i < edges.size(); ++i) {
            ix.in_segs[i] = edges[ix.in_order[i]].dst;
            ix.out_segs[i] = edges[ix.out_order[i]].src;
        }
        auto uniform = [](const std::vector<std::uint32_t>& segs) {
            std::vector<double> w(segs.size(), 1.0);
            std::size_t i = 0;
            while (i < segs.size()) {
                std::size_t j = i;
                while (j < segs.size() && segs[j] == segs[i]) ++j;
                for (std::size_t p = i; p < j; ++p) w[p] = 1.0 / double(j - i);
                i = j;
            }
            return w;
        };
        ix.in_uniform = uniform(ix.in_segs);
        ix.out_uniform = uniform(ix.out_segs);
    }

    // per-step edge feature constants, log-compressed like the node counts
    std::vector<std::vector<Tensor<Real>>> edge_feats(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        edge_feats[t].reserve(sg.step_edges[t].size());
        for (const auto& e : sg.step_edges[t]) {
            if (cfg_.mask_taocode_features) {
                edge_feats[t].push_back(Tensor<Real>::zeros({e.features.size()}));
            } else {
                std::vector<double> f = e.features;
                for (auto& v : f) v = std::log1p(v);
                edge_feats[t].push_back(constant_vec<Real>(f));
            }
        }
    }

    // h[u] holds the per-step states of the current layer; initially the
    // node embedding repeated across steps
    std::vector<std::vector<Tensor<Real>>> h(n, std::vector<Tensor<Real>>(steps));
    for (std::size_t u = 0; u < n; ++u) {
        auto h0 = embed_node(tape, sg, u);
        for (std::size_t t = 0; t < steps; ++t) h[u][t] = h0;
    }

    for (const auto& layer : params_.diffusion) {
        // state for nodes with no incident edges in a step: proj of zeros,
        // shared across all such (node, step) pairs
        auto zero2c = Tensor<Real>::zeros({2 * c});
        auto idle = leaky_relu(
            tape, add(tape, matmul(tape, layer.proj_w, zero2c), layer.proj_b), Real(kLeakySlope));

        std::vector<std::vector<Tensor<Real>>> projected(n, std::vector<Tensor<Real>>(steps));
        for (std::size_t t = 0; t < steps; ++t) {
            const auto& edges = sg.step_edges[t];
            const auto& ix = idx[t];
            if (edges.empty()) {
                for (std::size_t u = 0; u < n; ++u) projected[u][t] = idle;
                if (trace) {
                    trace->in_weights.emplace_back();
                    trace->out_weights.emplace_back();
                    trace->in_segs.emplace_back();
                    trace->out_segs.emplace_back();
                }
                continue;
            }
            std::vector<Tensor<Real>> emb(edges.size());
            for (std::size_t i = 0; i < edges.size(); ++i)
                emb[i] = matmul(tape, layer.edge_w, edge_feats[t][i]);

            auto attention = [&](const std::vector<std::size_t>* order,
                                 const std::vector<std::uint32_t>& segs,
                                 const std::vector<double>& uniform, const Tensor<Real>& attn_vec,
                                 bool in_direction, Tensor<Real>& alpha_out) {
                const std::size_t m = edges.size();
                std::vector<Tensor<Real>> msg(m);
                for (std::size_t i = 0; i < m; ++i) {
                    std::size_t e = order ? (*order)[i] : i;
                    msg[i] = emb[e];
                }
                Tensor<Real> alpha;
                if (cfg_.use_edge_attention) {
                    std::vector<Tensor<Real>> logits(m);
                    for (std::size_t i = 0; i < m; ++i) {
                        std::size_t e = order ? (*order)[i] : i;
                        const auto& edge = edges[e];
                        // aggregating node first, then the neighbor across the edge
                        const auto& h_agg = in_direction ? h[edge.dst][t] : h[edge.src][t];
                        const auto& h_nbr = in_direction ? h[edge.src][t] : h[edge.dst][t];
                        logits[i] = leaky_relu(
                            tape,
                            dot(tape, attn_vec, concat(tape, {h_agg, h_nbr, emb[e]})),
                            Real(kLeakySlope));
                    }
                    alpha = segment_softmax(
                        tape, concat(tape, std::span<const Tensor<Real>>(logits)), segs);
                } else {
                    alpha = constant_vec<Real>(uniform);
                }
                alpha_out = alpha;
                auto rows = stack_rows(tape, std::span<const Tensor<Real>>(msg));
                return weighted_segment_sum(tape, alpha, rows, segs, n);
            };

            Tensor<Real> alpha_in, alpha_out_t;
            auto in_mat = attention(&ix.in_order, ix.in_segs, ix.in_uniform, layer.attn_in, true,
                                    alpha_in);
            auto out_mat = attention(&ix.out_order, ix.out_segs, ix.out_uniform, layer.attn_out,
                                     false, alpha_out_t);
            if (trace) {
                auto values_of = [](const Tensor<Real>& t) {
                    std::vector<double> v(t.size());
                    for (std::size_t i = 0; i < t.size(); ++i) v[i] = double(t.value(i));
                    return v;
                };
                trace->in_weights.push_back(values_of(alpha_in));
                trace->out_weights.push_back(values_of(alpha_out_t));
                trace->in_segs.push_back(ix.in_segs);
                trace->out_segs.push_back(ix.out_segs);
            }

            std::vector<bool> touched(n, false);
            for (const auto& e : edges) {
                touched[e.src] = true;
                touched[e.dst] = true;
            }
            for (std::size_t u = 0; u < n; ++u) {
                if (!touched[u]) {
                    projected[u][t] = idle;
                    continue;
                }
                auto both = concat(tape, {row(tape, in_mat, u), row(tape, out_mat, u)});
                projected[u][t] = leaky_relu(
                    tape, add(tape, matmul(tape, layer.proj_w, both), layer.proj_b),
                    Real(kLeakySlope));
            }
        }
        for (std::size_t u = 0; u < n; ++u)
            h[u] = encode_sequence(tape, std::span<const Tensor<Real>>(projected[u]));
        if (trace) {
            std::vector<std::vector<std::vector<double>>> layer_states(
                steps, std::vector<std::vector<double>>(n));
            for (std::size_t u = 0; u < n; ++u)
                for (std::size_t t = 0; t < steps; ++t) {
                    std::vector<double> v(h[u][t].size());
                    for (std::size_t i = 0; i < v.size(); ++i) v[i] = double(h[u][t].value(i));
                    layer_states[t][u] = std::move(v);
                }
            trace->states.push_back(std::move(layer_states));
        }
    }

    std::vector<Tensor<Real>> d(n);
    for (std::size_t u = 0; u < n; ++u)
        d[u] = readout(tape, std::span<const Tensor<Real>>(h[u]));
    return d;
}

template <class Real>
Tensor<Real> InfNetModel<Real>::predict(Tape<Real>& tape, const QuerySubgraph& sg) const {
    const std::size_t c = static_cast<std::size_t>(cfg_.hidden);
    auto d = diffusion_block(tape, sg);

    std::vector<Tensor<Real>> s;
    Tensor<Real> zero_c;
    if (cfg_.use_structural_block) {
        s = structural_block(tape, sg);
    } else {
        zero_c = Tensor<Real>::zeros({c});
    }
    auto s_of = [&](std::size_t u) { return cfg_.use_structural_block ? s[u] : zero_c; };

    // g_q sums [s_v, d_v] over the seed senders (the target itself excluded)
    Tensor<Real> gq;
    std::size_t n_senders = 0;
    for (auto v : sg.seeds) {
        if (v == sg.target_local) continue;
        ++n_senders;
        auto sv = concat(tape, {s_of(v), d[v]});
        gq = gq.valid() ? add(tape, gq, sv) : sv;
    }
    check(n_senders >= 1, "predict: query has no seed senders");

    std::vector<double> item = sg.item_features;
    if (cfg_.mask_item_features) std::fill(item.begin(), item.end(), 0.0);
    auto attr_p = constant_vec<Real>(item);

    auto head_in =
        concat(tape, {d[sg.target_local], s_of(sg.target_local), gq, attr_p});
    auto logit = add(tape, dot(tape, params_.head_w, head_in), params_.head_b);
    return sigmoid(tape, logit);
}

template <class Real>
Real InfNetModel<Real>::score(const QuerySubgraph& sg) const {
    Tape<Real> tape;
    return predict(tape, sg).value(0);
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template class InfNetModel<float>;
template class InfNetModel<double>;

}  // namespace infnet
