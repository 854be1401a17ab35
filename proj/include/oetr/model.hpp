#pragma once

#include <map>
#include <string>
#include <vector>

#include "oetr/geometry.hpp"
#include "oetr/graph.hpp"
#include "oetr/tensor.hpp"

// The overlap-estimation network: shared strided CNN backbone, multi-scale
// kernel feature extractor, interleaved self/cross linear-attention encoder,
// single-query decoder, weighted-sum centerness head and (l,t,r,b) box head.
namespace oetr::model {

struct ModelConfig {
    // stride-2 stages; length fixes the backbone depth (4 stages = stride 16)
    std::vector<std::size_t> backbone_channels{16, 32, 64, 128};
    std::size_t d_model = 128;
    std::vector<std::size_t> msf_kernels{4, 8, 16};   // strictly increasing
    std::vector<std::size_t> msf_split{64, 32, 32};   // sums to d_model
    std::size_t encoder_iterations = 4;               // distinct weights per iteration
    std::size_t ffn_hidden = 256;
    std::vector<std::size_t> centerness_channels{32};  // 3x3 stack before the 1x1 logit conv
    std::size_t decoder_layers = 1;
    bool single_head = true;  // attention is single-head by construction

    void validate() const;
    std::size_t backbone_stride() const { return std::size_t{1} << backbone_channels.size(); }
    std::size_t total_stride() const { return backbone_stride() * 2; }  // MSF halves once more
    static ModelConfig tiny();  // small config for gradient checks
};

template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;  // same shape; zeroed at step start
};

template <typename T>
class ParamStore {
public:
    Parameter<T>& add(const std::string& name, Tensor<T> init);
    Parameter<T>& at(const std::string& name);
    const Parameter<T>& at(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) > 0; }
    const std::vector<std::string>& names() const { return order_; }
    std::size_t total_elements() const;
    void zero_grads();
    template <typename U>
    ParamStore<U> cast() const {
        ParamStore<U> out;
        for (const auto& n : order_) out.add(n, params_.at(n).value.template cast<U>());
        return out;
    }

private:
    std::vector<std::string> order_;
    std::map<std::string, Parameter<T>> params_;
};

// Creates all parameters with deterministic, seed-driven initialization.
template <typename T>
ParamStore<T> init_params(const ModelConfig& cfg, std::uint64_t seed);

// Binds one Graph to one ParamStore for a single forward/backward pass.
// Parameter leaves are cached so shared weights (the query, the heads, the
// encoder blocks) accumulate gradients into a single node per parameter.
template <typename T>
class ModelGraph {
public:
    ModelGraph(Graph<T>& g, ParamStore<T>& params, bool train)
        : graph_(g), params_(params), train_(train) {}

    Value param(const std::string& name) {
        auto it = leaves_.find(name);
        if (it != leaves_.end()) return it->second;
        Value v = graph_.leaf(params_.at(name).value, train_);
        leaves_.emplace(name, v);
        return v;
    }

    // Pre-register an externally created leaf for a parameter (used by the
    // finite-difference harness to own the leaves itself).
    void bind(const std::string& name, Value v) { leaves_[name] = v; }

    // After backward(): fold the graph's leaf gradients into the store.
    void accumulate_grads() {
        for (auto& [name, v] : leaves_) {
            const auto& src = graph_.grad(v);
            auto& dst = params_.at(name).grad;
            for (std::size_t i = 0; i < src.numel(); ++i) dst.data[i] += src.data[i];
        }
    }

    Graph<T>& graph() { return graph_; }
    ParamStore<T>& params() { return params_; }
    bool train() const { return train_; }

private:
    Graph<T>& graph_;
    ParamStore<T>& params_;
    bool train_;
    std::map<std::string, Value> leaves_;
};

// Graph handles for everything the loss needs; per-image.
struct HeadRefs {
    Value prob_map;  // [Hf, Wf], sums to 1
    Value center_x;  // scalars, normalized [0,1]
    Value center_y;
};

struct ImageRefs {
    Value features;        // correlated features f, [N, d]
    Value query;           // decoded q, [1, d]
    HeadRefs head;         // own-decoded WS-centerness (c-hat)
    HeadRefs consistency;  // cross-decoded WS-centerness (c-tilde)
    Value offsets;         // [4] = (l, t, r, b) in (0,1)
    Value box_cxcywh;      // [4] normalized, assembled from center + offsets
};

struct ForwardRefs {
    std::size_t grid_h = 0, grid_w = 0;
    ImageRefs a, b;
};

// Per-image validity mask at the feature grid (1 = real content, 0 = padding).
// Computed from the unpadded extent of the model input.
template <typename T>
Tensor<T> feature_mask(const ModelConfig& cfg, std::size_t padded_h, std::size_t padded_w,
                       std::size_t valid_h, std::size_t valid_w);

// Individual stages, exposed for tests.
template <typename T>
Value backbone_forward(ModelGraph<T>& m, const ModelConfig& cfg, Value image);
template <typename T>
Value msf_forward(ModelGraph<T>& m, const ModelConfig& cfg, Value feat);
template <typename T>
std::pair<Value, Value> encoder_forward(ModelGraph<T>& m, const ModelConfig& cfg, Value fa,
                                        Value fb, std::size_t grid_h, std::size_t grid_w,
                                        const Tensor<T>* mask_a = nullptr,
                                        const Tensor<T>* mask_b = nullptr);
template <typename T>
Value decoder_forward(ModelGraph<T>& m, const ModelConfig& cfg, Value f,
                      const Tensor<T>* mask = nullptr);
template <typename T>
HeadRefs ws_centerness(ModelGraph<T>& m, const ModelConfig& cfg, Value query, Value features,
                       std::size_t grid_h, std::size_t grid_w, const Tensor<T>* mask = nullptr);
template <typename T>
Value box_regression(ModelGraph<T>& m, Value query);

// Full forward pass over a padded image pair (same size, divisible by 32).
// Images are [3,H,W] in [0,1].
template <typename T>
ForwardRefs model_forward(ModelGraph<T>& m, const ModelConfig& cfg, const Tensor<T>& image_a,
                          const Tensor<T>& image_b, const Tensor<T>* mask_a = nullptr,
                          const Tensor<T>* mask_b = nullptr);

// Runtime view of one image's prediction.
struct OverlapPrediction {
    std::vector<double> prob_map;  // row-major Hf x Wf
    std::size_t grid_h = 0, grid_w = 0;
    double center_x = 0, center_y = 0;  // normalized expectation (Eq-style weighted sum)
    double l = 0, t = 0, r = 0, b = 0;
    std::array<double, 4> box_cxcywh{};       // normalized
    geometry::OverlapBox box_px;              // clamped to the image
    double consistency_x = 0, consistency_y = 0;
    double max_prob = 0;
    bool degenerate = false;      // hit the 1-px minimum side clamp
    bool low_confidence = false;  // max_prob < 2 / (Hf*Wf)
};

// Pixel-space box assembly: center/offsets normalized, output clamped to the
// image with a 1-px minimum side (degenerate flag reports the clamp).
geometry::OverlapBox assemble_box(double cx, double cy, double l, double t, double r, double b,
                                  double img_w, double img_h, bool* degenerate = nullptr);

template <typename T>
std::pair<OverlapPrediction, OverlapPrediction> extract_predictions(
    Graph<T>& g, const ForwardRefs& refs, double img_w, double img_h);

// Checkpoint: directory with manifest.json + tensors/<name> in the shared
// binary container. Values stored in the store's own dtype.
struct CheckpointMeta {
    std::size_t input_long_side = 64;
    std::size_t pad_multiple = 32;
    std::string note;
};

template <typename T>
void save_checkpoint(const std::string& dir, const ParamStore<T>& params, const ModelConfig& cfg,
                     const CheckpointMeta& meta);

template <typename T>
struct Checkpoint {
    ParamStore<T> params;
    ModelConfig config;
    CheckpointMeta meta;
};

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& dir);

}  // namespace oetr::model
