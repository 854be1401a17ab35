#include "oetr/model.hpp"

#include <cassert>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "oetr/ops.hpp"
#include "oetr/schemas.hpp"
#include "oetr/tensor_io.hpp"

namespace oetr::model {

namespace fs = std::filesystem;
using nlohmann::json;

void ModelConfig::validate() const {
    if (backbone_channels.empty()) throw InvalidConfig("backbone needs at least one stage");
    if (d_model % 4 != 0) throw InvalidConfig("d_model must be divisible by 4");
    if (msf_kernels.empty() || msf_kernels.size() != msf_split.size())
        throw InvalidConfig("msf kernels and channel split lengths differ");
    for (std::size_t i = 1; i < msf_kernels.size(); ++i)
        if (msf_kernels[i] <= msf_kernels[i - 1])
            throw InvalidConfig("msf kernel sizes must be strictly increasing");
    std::size_t sum = 0;
    for (std::size_t c : msf_split) sum += c;
    if (sum != d_model) throw InvalidConfig("msf channel split must sum to d_model");
    if (encoder_iterations < 1) throw InvalidConfig("encoder needs at least one iteration");
    if (decoder_layers != 1) throw InvalidConfig("decoder depth is fixed at one layer");
    if (ffn_hidden < 1 || centerness_channels.empty())
        throw InvalidConfig("ffn and centerness stacks must be non-empty");
}

ModelConfig ModelConfig::tiny() {
    ModelConfig c;
    c.backbone_channels = {4, 8, 8, 16};
    c.d_model = 16;
    c.msf_kernels = {4, 8, 16};
    c.msf_split = {8, 4, 4};
    c.encoder_iterations = 1;
    c.ffn_hidden = 16;
    c.centerness_channels = {8};
    return c;
}

template <typename T>
Parameter<T>& ParamStore<T>::add(const std::string& name, Tensor<T> init) {
    auto [it, inserted] = params_.try_emplace(name);
    if (!inserted) throw InvalidConfig("duplicate parameter: " + name);
    it->second.name = name;
    it->second.grad = Tensor<T>::zeros(init.shape);
    it->second.value = std::move(init);
    order_.push_back(name);
    return it->second;
}

template <typename T>
Parameter<T>& ParamStore<T>::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw InvalidConfig("unknown parameter: " + name);
    return it->second;
}

template <typename T>
const Parameter<T>& ParamStore<T>::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw InvalidConfig("unknown parameter: " + name);
    return it->second;
}

template <typename T>
std::size_t ParamStore<T>::total_elements() const {
    std::size_t n = 0;
    for (const auto& [k, p] : params_) n += p.value.numel();
    return n;
}

template <typename T>
void ParamStore<T>::zero_grads() {
    for (auto& [k, p] : params_) p.grad.fill(T(0));
}

namespace {

template <typename T>
void add_conv(ParamStore<T>& s, Rng& rng, const std::string& name, std::size_t co, std::size_t ci,
              std::size_t k, double gain = 2.0, double bias_val = 0.0) {
    const double std = std::sqrt(gain / static_cast<double>(ci * k * k));
    s.add(name + ".w", rng.normal_tensor<T>({co, ci, k, k}, 0.0, std));
    s.add(name + ".b", Tensor<T>::full({co}, static_cast<T>(bias_val)));
}

template <typename T>
void add_linear(ParamStore<T>& s, Rng& rng, const std::string& name, std::size_t out,
                std::size_t in, double gain = 1.0) {
    const double std = std::sqrt(gain / static_cast<double>(in));
    s.add(name + ".w", rng.normal_tensor<T>({out, in}, 0.0, std));
    s.add(name + ".b", Tensor<T>::zeros({out}));
}

// Right-multiplication projection matrix [d_in, d_out].
template <typename T>
void add_proj(ParamStore<T>& s, Rng& rng, const std::string& name, std::size_t d) {
    s.add(name, rng.normal_tensor<T>({d, d}, 0.0, std::sqrt(1.0 / static_cast<double>(d))));
}

template <typename T>
void add_ln(ParamStore<T>& s, const std::string& name, std::size_t d) {
    s.add(name + ".g", Tensor<T>::full({d}, T(1)));
    s.add(name + ".b", Tensor<T>::zeros({d}));
}

template <typename T>
void add_attn_block(ParamStore<T>& s, Rng& rng, const std::string& prefix, std::size_t d,
                    std::size_t ffn) {
    add_proj(s, rng, prefix + ".wq", d);
    add_proj(s, rng, prefix + ".wk", d);
    add_proj(s, rng, prefix + ".wv", d);
    add_proj(s, rng, prefix + ".wo", d);
    add_ln(s, prefix + ".ln1", d);
    add_linear(s, rng, prefix + ".ffn1", ffn, d, 2.0);
    add_linear(s, rng, prefix + ".ffn2", d, ffn, 1.0);
    add_ln(s, prefix + ".ln2", d);
}

}  // namespace

template <typename T>
ParamStore<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    ParamStore<T> s;

    std::size_t ci = 3;
    for (std::size_t i = 0; i < cfg.backbone_channels.size(); ++i) {
        add_conv(s, rng, "backbone." + std::to_string(i), cfg.backbone_channels[i], ci, 3);
        ci = cfg.backbone_channels[i];
    }
    for (std::size_t i = 0; i < cfg.msf_kernels.size(); ++i)
        add_conv(s, rng, "msf.k" + std::to_string(cfg.msf_kernels[i]), cfg.msf_split[i], ci,
                 cfg.msf_kernels[i]);

    for (std::size_t i = 0; i < cfg.encoder_iterations; ++i) {
        const std::string base = "enc." + std::to_string(i);
        add_attn_block(s, rng, base + ".self", cfg.d_model, cfg.ffn_hidden);
        add_attn_block(s, rng, base + ".cross", cfg.d_model, cfg.ffn_hidden);
    }

    s.add("query", rng.normal_tensor<T>({1, cfg.d_model}, 0.0, 0.1));
    add_proj(s, rng, "dec.self.wq", cfg.d_model);
    add_proj(s, rng, "dec.self.wk", cfg.d_model);
    add_proj(s, rng, "dec.self.wv", cfg.d_model);
    add_proj(s, rng, "dec.self.wo", cfg.d_model);
    add_ln(s, "dec.ln1", cfg.d_model);
    add_proj(s, rng, "dec.cross.wq", cfg.d_model);
    add_proj(s, rng, "dec.cross.wk", cfg.d_model);
    add_proj(s, rng, "dec.cross.wv", cfg.d_model);
    add_proj(s, rng, "dec.cross.wo", cfg.d_model);
    add_ln(s, "dec.ln2", cfg.d_model);
    add_linear(s, rng, "dec.ffn1", cfg.ffn_hidden, cfg.d_model, 2.0);
    add_linear(s, rng, "dec.ffn2", cfg.d_model, cfg.ffn_hidden, 1.0);
    add_ln(s, "dec.ln3", cfg.d_model);

    std::size_t cc = cfg.d_model;
    for (std::size_t i = 0; i < cfg.centerness_channels.size(); ++i) {
        add_conv(s, rng, "center." + std::to_string(i), cfg.centerness_channels[i], cc, 3);
        cc = cfg.centerness_channels[i];
    }
    // near-uniform initial probability map
    add_conv(s, rng, "center.out", 1, cc, 1, 0.01);

    add_linear(s, rng, "box.0", cfg.d_model, cfg.d_model, 2.0);
    // zero-init: offsets start at sigmoid(0) = 0.5
    s.add("box.1.w", Tensor<T>::zeros({4, cfg.d_model}));
    s.add("box.1.b", Tensor<T>::zeros({4}));
    return s;
}

template <typename T>
Tensor<T> feature_mask(const ModelConfig& cfg, std::size_t padded_h, std::size_t padded_w,
                       std::size_t valid_h, std::size_t valid_w) {
    const std::size_t stride = cfg.total_stride();
    if (padded_h % stride != 0 || padded_w % stride != 0)
        throw InvalidShape("feature_mask: padded size not divisible by the model stride");
    const std::size_t gh = padded_h / stride, gw = padded_w / stride;
    Tensor<T> mask({gh, gw});
    for (std::size_t i = 0; i < gh; ++i)
        for (std::size_t j = 0; j < gw; ++j) {
            const double cy = (i + 0.5) * static_cast<double>(stride);
            const double cx = (j + 0.5) * static_cast<double>(stride);
            mask.at(i, j) = (cy <= static_cast<double>(valid_h) && cx <= static_cast<double>(valid_w))
                                ? T(1)
                                : T(0);
        }
    return mask;
}

template <typename T>
Value backbone_forward(ModelGraph<T>& m, const ModelConfig& cfg, Value image) {
    auto& g = m.graph();
    const auto& shape = g.value(image).shape;
    if (shape.size() != 3 || shape[0] != 3) throw InvalidShape("backbone: expected [3,H,W] input");
    const std::size_t div = cfg.total_stride();
    if (shape[1] % div != 0 || shape[2] % div != 0)
        throw InvalidShape("backbone: H and W must be divisible by " + std::to_string(div));
    Value x = image;
    for (std::size_t i = 0; i < cfg.backbone_channels.size(); ++i) {
        const std::string base = "backbone." + std::to_string(i);
        x = ops::conv2d(g, x, m.param(base + ".w"), m.param(base + ".b"), 2, 1);
        x = ops::relu(g, x);
    }
    return x;
}

template <typename T>
Value msf_forward(ModelGraph<T>& m, const ModelConfig& cfg, Value feat) {
    auto& g = m.graph();
    const auto& shape = g.value(feat).shape;
    if (shape.size() != 3) throw InvalidShape("msf: expected [C,h,w] input");
    const std::size_t h = shape[1], w = shape[2];
    if (h % 2 != 0 || w % 2 != 0) throw InvalidShape("msf: feature extent must be even");
    std::vector<Value> branches;
    for (std::size_t k : cfg.msf_kernels) {
        const std::string base = "msf.k" + std::to_string(k);
        // stride-2 "same" padding: every branch emits h/2 x w/2
        branches.push_back(
            ops::conv2d(g, feat, m.param(base + ".w"), m.param(base + ".b"), 2, (k - 1) / 2));
    }
    Value cat = ops::concat_channels(g, branches);
    const auto& cs = g.value(cat).shape;
    if (cs[0] != cfg.d_model || cs[1] != h / 2 || cs[2] != w / 2)
        throw InvalidConfig("msf: branch concat does not produce [d_model, h/2, w/2]");
    return ops::chw_to_nc(g, cat);  // [N, d_model]
}

namespace {

// One attention sublayer + feed-forward sublayer, each with residual and
// layer norm. x attends into src (self when src == x).
template <typename T>
Value attn_block(ModelGraph<T>& m, const std::string& prefix, Value x, Value src,
                 const Tensor<T>* src_mask) {
    auto& g = m.graph();
    Value q = ops::matmul(g, x, m.param(prefix + ".wq"));
    Value k = ops::matmul(g, src, m.param(prefix + ".wk"));
    Value v = ops::matmul(g, src, m.param(prefix + ".wv"));
    Value msg = ops::linear_attention(g, q, k, v, src_mask);
    Value y = ops::layer_norm(g, ops::add(g, x, ops::matmul(g, msg, m.param(prefix + ".wo"))),
                              m.param(prefix + ".ln1.g"), m.param(prefix + ".ln1.b"));
    Value ffn = ops::linear(g, ops::relu(g, ops::linear(g, y, m.param(prefix + ".ffn1.w"),
                                                        m.param(prefix + ".ffn1.b"))),
                            m.param(prefix + ".ffn2.w"), m.param(prefix + ".ffn2.b"));
    return ops::layer_norm(g, ops::add(g, y, ffn), m.param(prefix + ".ln2.g"),
                           m.param(prefix + ".ln2.b"));
}

template <typename T>
Tensor<T> flatten_mask(const Tensor<T>* mask) {
    return mask ? mask->reshaped({mask->numel()}) : Tensor<T>();
}

}  // namespace

template <typename T>
std::pair<Value, Value> encoder_forward(ModelGraph<T>& m, const ModelConfig& cfg, Value fa,
                                        Value fb, std::size_t grid_h, std::size_t grid_w,
                                        const Tensor<T>* mask_a, const Tensor<T>* mask_b) {
    auto& g = m.graph();
    const auto& sa = g.value(fa).shape;
    const auto& sb = g.value(fb).shape;
    if (sa.size() != 2 || sb.size() != 2 || sa[1] != cfg.d_model || sb[1] != cfg.d_model)
        throw InvalidShape("encoder: features must be [N, d_model]");
    if (sa[0] != grid_h * grid_w || sb[0] != grid_h * grid_w)
        throw InvalidShape("encoder: N must equal grid_h * grid_w");
    if ((mask_a && mask_a->numel() != sa[0]) || (mask_b && mask_b->numel() != sb[0]))
        throw InvalidShape("encoder: mask/feature length mismatch");

    const Tensor<T> pe = ops::positional_encoding<T>(grid_h, grid_w, cfg.d_model);
    const Tensor<T> ma = flatten_mask(mask_a);
    const Tensor<T> mb = flatten_mask(mask_b);
    const Tensor<T>* pma = mask_a ? &ma : nullptr;
    const Tensor<T>* pmb = mask_b ? &mb : nullptr;

    Value a = fa, b = fb;
    for (std::size_t i = 0; i < cfg.encoder_iterations; ++i) {
        const std::string base = "enc." + std::to_string(i);
        // positional encoding re-added every iteration
        a = ops::add_const(g, a, pe);
        b = ops::add_const(g, b, pe);
        Value a1 = attn_block(m, base + ".self", a, a, pma);
        Value b1 = attn_block(m, base + ".self", b, b, pmb);
        a = attn_block(m, base + ".cross", a1, b1, pmb);
        b = attn_block(m, base + ".cross", b1, a1, pma);
    }
    return {a, b};
}

template <typename T>
Value decoder_forward(ModelGraph<T>& m, const ModelConfig& cfg, Value f, const Tensor<T>* mask) {
    auto& g = m.graph();
    if (g.value(f).shape.size() != 2 || g.value(f).shape[1] != cfg.d_model)
        throw InvalidShape("decoder: features must be [N, d_model]");
    Value q = m.param("query");

    // self-attention over the single query (identity-like but learnable)
    Value sq = ops::matmul(g, q, m.param("dec.self.wq"));
    Value sk = ops::matmul(g, q, m.param("dec.self.wk"));
    Value sv = ops::matmul(g, q, m.param("dec.self.wv"));
    Value smsg = ops::linear_attention(g, sq, sk, sv);
    q = ops::layer_norm(g, ops::add(g, q, ops::matmul(g, smsg, m.param("dec.self.wo"))),
                        m.param("dec.ln1.g"), m.param("dec.ln1.b"));

    Tensor<T> fm = flatten_mask(mask);
    Value cq = ops::matmul(g, q, m.param("dec.cross.wq"));
    Value ck = ops::matmul(g, f, m.param("dec.cross.wk"));
    Value cv = ops::matmul(g, f, m.param("dec.cross.wv"));
    Value cmsg = ops::linear_attention(g, cq, ck, cv, mask ? &fm : nullptr);
    q = ops::layer_norm(g, ops::add(g, q, ops::matmul(g, cmsg, m.param("dec.cross.wo"))),
                        m.param("dec.ln2.g"), m.param("dec.ln2.b"));

    Value ffn = ops::linear(g, ops::relu(g, ops::linear(g, q, m.param("dec.ffn1.w"),
                                                        m.param("dec.ffn1.b"))),
                            m.param("dec.ffn2.w"), m.param("dec.ffn2.b"));
    return ops::layer_norm(g, ops::add(g, q, ffn), m.param("dec.ln3.g"), m.param("dec.ln3.b"));
}

template <typename T>
HeadRefs ws_centerness(ModelGraph<T>& m, const ModelConfig& cfg, Value query, Value features,
                       std::size_t grid_h, std::size_t grid_w, const Tensor<T>* mask) {
    auto& g = m.graph();
    // similarity-weighted features, reshaped to a map for the FCN
    Value sim = ops::rows_dot(g, features, query);
    Value scaled = ops::row_scale(g, features, sim);
    Value map = ops::nc_to_chw(g, scaled, grid_h, grid_w);
    for (std::size_t i = 0; i < cfg.centerness_channels.size(); ++i) {
        const std::string base = "center." + std::to_string(i);
        map = ops::relu(g, ops::conv2d(g, map, m.param(base + ".w"), m.param(base + ".b"), 1, 1));
    }
    Value logits = ops::conv2d(g, map, m.param("center.out.w"), m.param("center.out.b"), 1, 0);
    logits = ops::reshape(g, logits, {grid_h, grid_w});
    Value prob = ops::spatial_softmax(g, logits, mask);

    // expectation of cell-center coordinates, normalized to [0,1]
    Tensor<T> xs({grid_h, grid_w}), ys({grid_h, grid_w});
    for (std::size_t i = 0; i < grid_h; ++i)
        for (std::size_t j = 0; j < grid_w; ++j) {
            xs.at(i, j) = static_cast<T>((j + 0.5) / static_cast<double>(grid_w));
            ys.at(i, j) = static_cast<T>((i + 0.5) / static_cast<double>(grid_h));
        }
    HeadRefs out;
    out.prob_map = prob;
    out.center_x = ops::dot_const(g, prob, std::move(xs));
    out.center_y = ops::dot_const(g, prob, std::move(ys));

#ifndef NDEBUG
    const auto& p = g.value(prob);
    T psum = 0;
    for (T v : p.data) {
        assert(v >= T(0));
        psum += v;
    }
    assert(std::abs(double(psum) - 1.0) < 1e-5);
    assert(double(g.value(out.center_x).data[0]) >= 0.0 &&
           double(g.value(out.center_x).data[0]) <= 1.0);
    assert(double(g.value(out.center_y).data[0]) >= 0.0 &&
           double(g.value(out.center_y).data[0]) <= 1.0);
#endif
    return out;
}

template <typename T>
Value box_regression(ModelGraph<T>& m, Value query) {
    auto& g = m.graph();
    Value h = ops::relu(g, ops::linear(g, query, m.param("box.0.w"), m.param("box.0.b")));
    Value o = ops::sigmoid(g, ops::linear(g, h, m.param("box.1.w"), m.param("box.1.b")));
    return ops::reshape(g, o, {4});
}

namespace {

// Differentiable normalized cxcywh from a WS center and (l,t,r,b) offsets.
template <typename T>
Value assemble_cxcywh(Graph<T>& g, const HeadRefs& head, Value offsets) {
    Value l = ops::pick(g, offsets, 0);
    Value t = ops::pick(g, offsets, 1);
    Value r = ops::pick(g, offsets, 2);
    Value b = ops::pick(g, offsets, 3);
    Value cx = ops::add(g, head.center_x, ops::affine(g, ops::sub(g, r, l), T(0.5)));
    Value cy = ops::add(g, head.center_y, ops::affine(g, ops::sub(g, b, t), T(0.5)));
    Value w = ops::add(g, l, r);
    Value h = ops::add(g, t, b);
    return ops::pack(g, std::vector<Value>{cx, cy, w, h});
}

}  // namespace

template <typename T>
ForwardRefs model_forward(ModelGraph<T>& m, const ModelConfig& cfg, const Tensor<T>& image_a,
                          const Tensor<T>& image_b, const Tensor<T>* mask_a,
                          const Tensor<T>* mask_b) {
    auto& g = m.graph();
    if (!image_a.same_shape(image_b))
        throw InvalidShape("model_forward: images must share a padded size");
    Value ia = ops::affine(g, g.constant(image_a), T(2), T(-1));
    Value ib = ops::affine(g, g.constant(image_b), T(2), T(-1));

    Value ba = backbone_forward(m, cfg, ia);
    Value bb = backbone_forward(m, cfg, ib);
    const std::size_t grid_h = g.value(ba).shape[1] / 2;
    const std::size_t grid_w = g.value(ba).shape[2] / 2;
    Value fa0 = msf_forward(m, cfg, ba);
    Value fb0 = msf_forward(m, cfg, bb);
    auto [fa, fb] = encoder_forward(m, cfg, fa0, fb0, grid_h, grid_w, mask_a, mask_b);

    Value qa = decoder_forward(m, cfg, fa, mask_a);
    Value qb = decoder_forward(m, cfg, fb, mask_b);

    ForwardRefs refs;
    refs.grid_h = grid_h;
    refs.grid_w = grid_w;
    refs.a.features = fa;
    refs.b.features = fb;
    refs.a.query = qa;
    refs.b.query = qb;
    refs.a.head = ws_centerness(m, cfg, qa, fa, grid_h, grid_w, mask_a);
    refs.b.head = ws_centerness(m, cfg, qb, fb, grid_h, grid_w, mask_b);
    // symmetric consistency: decode each query against the other features
    refs.a.consistency = ws_centerness(m, cfg, qb, fa, grid_h, grid_w, mask_a);
    refs.b.consistency = ws_centerness(m, cfg, qa, fb, grid_h, grid_w, mask_b);
    refs.a.offsets = box_regression(m, qa);
    refs.b.offsets = box_regression(m, qb);
    refs.a.box_cxcywh = assemble_cxcywh(g, refs.a.head, refs.a.offsets);
    refs.b.box_cxcywh = assemble_cxcywh(g, refs.b.head, refs.b.offsets);
    return refs;
}

geometry::OverlapBox assemble_box(double cx, double cy, double l, double t, double r, double b,
                                  double img_w, double img_h, bool* degenerate) {
    geometry::OverlapBox box{(cx - l) * img_w, (cy - t) * img_h, (cx + r) * img_w,
                             (cy + b) * img_h};
    box = box.clamped(img_w, img_h);
    bool degen = false;
    if (box.width() < 1.0) {
        degen = true;
        const double c = std::clamp(cx * img_w, 0.5, img_w - 0.5);
        box.x_min = c - 0.5;
        box.x_max = c + 0.5;
    }
    if (box.height() < 1.0) {
        degen = true;
        const double c = std::clamp(cy * img_h, 0.5, img_h - 0.5);
        box.y_min = c - 0.5;
        box.y_max = c + 0.5;
    }
    if (degenerate) *degenerate = degen;
    return box;
}

template <typename T>
std::pair<OverlapPrediction, OverlapPrediction> extract_predictions(Graph<T>& g,
                                                                    const ForwardRefs& refs,
                                                                    double img_w, double img_h) {
    auto extract = [&](const ImageRefs& ir) {
        OverlapPrediction p;
        const auto& prob = g.value(ir.head.prob_map);
        p.grid_h = prob.shape[0];
        p.grid_w = prob.shape[1];
        p.prob_map.assign(prob.data.begin(), prob.data.end());
        p.max_prob = static_cast<double>(kernels::max(prob.numel(), prob.data.data()));
        p.low_confidence = p.max_prob < 2.0 / static_cast<double>(prob.numel());
        p.center_x = g.value(ir.head.center_x).data[0];
        p.center_y = g.value(ir.head.center_y).data[0];
        const auto& off = g.value(ir.offsets);
        p.l = off.data[0];
        p.t = off.data[1];
        p.r = off.data[2];
        p.b = off.data[3];
        const auto& box = g.value(ir.box_cxcywh);
        for (int i = 0; i < 4; ++i) p.box_cxcywh[static_cast<std::size_t>(i)] = box.data[static_cast<std::size_t>(i)];
        p.consistency_x = g.value(ir.consistency.center_x).data[0];
        p.consistency_y = g.value(ir.consistency.center_y).data[0];
        p.box_px = assemble_box(p.center_x, p.center_y, p.l, p.t, p.r, p.b, img_w, img_h,
                                &p.degenerate);
        return p;
    };
    return {extract(refs.a), extract(refs.b)};
}

// ------------------------------------------------------------- checkpoints

namespace {
std::string dtype_name(float) { return "f32"; }
std::string dtype_name(double) { return "f64"; }
}  // namespace

template <typename T>
void save_checkpoint(const std::string& dir, const ParamStore<T>& params, const ModelConfig& cfg,
                     const CheckpointMeta& meta) {
    fs::create_directories(fs::path(dir) / "tensors");
    json man;
    man["format_version"] = 1;
    man["dtype"] = dtype_name(T{});
    man["input_long_side"] = meta.input_long_side;
    man["pad_multiple"] = meta.pad_multiple;
    if (!meta.note.empty()) man["note"] = meta.note;
    man["model"] = json::parse(schemas::model_config_to_json(cfg));
    json shapes = json::object();
    for (const auto& name : params.names()) {
        const auto& p = params.at(name);
        shapes[name] = p.value.shape;
        io::save_tensor((fs::path(dir) / "tensors" / name).string(), p.value);
    }
    man["params"] = shapes;
    schemas::write_text_file((fs::path(dir) / "manifest.json").string(), man.dump(2));
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& dir) {
    const fs::path root(dir);
    if (!fs::exists(root / "manifest.json"))
        throw IoError("not a checkpoint directory (missing manifest.json): " + dir);
    const json man = json::parse(schemas::read_text_file((root / "manifest.json").string()));
    if (man.value("format_version", 0) != 1)
        throw IoError("unsupported checkpoint format version");
    Checkpoint<T> ck;
    ck.config = schemas::model_config_from_json(man.at("model").dump());
    ck.meta.input_long_side = man.value("input_long_side", std::size_t{64});
    ck.meta.pad_multiple = man.value("pad_multiple", std::size_t{32});
    ck.meta.note = man.value("note", std::string());

    // the config fixes the expected parameter set; the manifest must agree
    ParamStore<T> expected = init_params<T>(ck.config, 0);
    const auto& shapes = man.at("params");
    for (const auto& name : expected.names()) {
        if (!shapes.contains(name))
            throw IoError("checkpoint is missing parameter " + name +
                          " (config/model version mismatch)");
        Tensor<T> t = io::load_tensor<T>((root / "tensors" / name).string());
        if (t.shape != expected.at(name).value.shape)
            throw IoError("checkpoint parameter " + name + " has shape " + t.shape_str() +
                          ", expected " + expected.at(name).value.shape_str());
        ck.params.add(name, std::move(t));
    }
    return ck;
}

// ------------------------------------------------------------- instantiation

template class ParamStore<float>;
template class ParamStore<double>;
template ParamStore<float> init_params<float>(const ModelConfig&, std::uint64_t);
template ParamStore<double> init_params<double>(const ModelConfig&, std::uint64_t);
template Tensor<float> feature_mask<float>(const ModelConfig&, std::size_t, std::size_t, std::size_t, std::size_t);
template Tensor<double> feature_mask<double>(const ModelConfig&, std::size_t, std::size_t, std::size_t, std::size_t);
template Value backbone_forward<float>(ModelGraph<float>&, const ModelConfig&, Value);
template Value backbone_forward<double>(ModelGraph<double>&, const ModelConfig&, Value);
template Value msf_forward<float>(ModelGraph<float>&, const ModelConfig&, Value);
template Value msf_forward<double>(ModelGraph<double>&, const ModelConfig&, Value);
template std::pair<Value, Value> encoder_forward<float>(ModelGraph<float>&, const ModelConfig&, Value, Value, std::size_t, std::size_t, const Tensor<float>*, const Tensor<float>*);
template std::pair<Value, Value> encoder_forward<double>(ModelGraph<double>&, const ModelConfig&, Value, Value, std::size_t, std::size_t, const Tensor<double>*, const Tensor<double>*);
template Value decoder_forward<float>(ModelGraph<float>&, const ModelConfig&, Value, const Tensor<float>*);
template Value decoder_forward<double>(ModelGraph<double>&, const ModelConfig&, Value, const Tensor<double>*);
template HeadRefs ws_centerness<float>(ModelGraph<float>&, const ModelConfig&, Value, Value, std::size_t, std::size_t, const Tensor<float>*);
template HeadRefs ws_centerness<double>(ModelGraph<double>&, const ModelConfig&, Value, Value, std::size_t, std::size_t, const Tensor<double>*);
template Value box_regression<float>(ModelGraph<float>&, Value);
template Value box_regression<double>(ModelGraph<double>&, Value);
template ForwardRefs model_forward<float>(ModelGraph<float>&, const ModelConfig&, const Tensor<float>&, const Tensor<float>&, const Tensor<float>*, const Tensor<float>*);
template ForwardRefs model_forward<double>(ModelGraph<double>&, const ModelConfig&, const Tensor<double>&, const Tensor<double>&, const Tensor<double>*, const Tensor<double>*);
template std::pair<OverlapPrediction, OverlapPrediction> extract_predictions<float>(Graph<float>&, const ForwardRefs&, double, double);
template std::pair<OverlapPrediction, OverlapPrediction> extract_predictions<double>(Graph<double>&, const ForwardRefs&, double, double);
template void save_checkpoint<float>(const std::string&, const ParamStore<float>&, const ModelConfig&, const CheckpointMeta&);
template void save_checkpoint<double>(const std::string&, const ParamStore<double>&, const ModelConfig&, const CheckpointMeta&);
template Checkpoint<float> load_checkpoint<float>(const std::string&);
template Checkpoint<double> load_checkpoint<double>(const std::string&);

}  // namespace oetr::model
