#include "oetr/schemas.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace oetr::schemas {

using nlohmann::json;

namespace {

json parse(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw IoError("malformed JSON document");
    return j;
}

void check_version(const json& j) {
    if (!j.contains("schema_version") || !j["schema_version"].is_number_integer())
        throw IoError("document is missing schema_version");
    const int v = j["schema_version"];
    if (v != kSchemaVersion)
        throw IoError("unsupported schema_version " + std::to_string(v));
}

json box_to_json(const geometry::OverlapBox& b) {
    return {{"x_min", b.x_min}, {"y_min", b.y_min}, {"x_max", b.x_max}, {"y_max", b.y_max}};
}

geometry::OverlapBox box_from_json(const json& j) {
    return {j.at("x_min").get<double>(), j.at("y_min").get<double>(),
            j.at("x_max").get<double>(), j.at("y_max").get<double>()};
}

json transform_to_json(const pipeline::ImageTransform& t) {
    return {{"resize_ratio", t.resize_ratio},
            {"pad", {t.pad_left, t.pad_top}},
            {"crop", {t.crop_x, t.crop_y}},
            {"crop_ratio", t.crop_ratio}};
}

pipeline::ImageTransform transform_from_json(const json& j) {
    pipeline::ImageTransform t;
    t.resize_ratio = j.at("resize_ratio").get<double>();
    t.pad_left = j.at("pad").at(0).get<double>();
    t.pad_top = j.at("pad").at(1).get<double>();
    t.crop_x = j.at("crop").at(0).get<double>();
    t.crop_y = j.at("crop").at(1).get<double>();
    t.crop_ratio = j.at("crop_ratio").get<double>();
    t.validate();
    return t;
}

}  // namespace

std::string camera_to_json(const CameraRecord& cam) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["intrinsics"] = {cam.intrinsics.fx, cam.intrinsics.fy, cam.intrinsics.cx,
                       cam.intrinsics.cy, double(cam.intrinsics.width),
                       double(cam.intrinsics.height)};
    j["rotation"] = cam.rotation;
    j["translation"] = cam.translation;
    return j.dump(2);
}

CameraRecord camera_from_json(const std::string& text) {
    const json j = parse(text);
    check_version(j);
    CameraRecord cam;
    const auto& k = j.at("intrinsics");
    if (!k.is_array() || k.size() != 6) throw IoError("intrinsics must be [fx,fy,cx,cy,w,h]");
    cam.intrinsics.fx = k[0];
    cam.intrinsics.fy = k[1];
    cam.intrinsics.cx = k[2];
    cam.intrinsics.cy = k[3];
    cam.intrinsics.width = static_cast<int>(k[4].get<double>());
    cam.intrinsics.height = static_cast<int>(k[5].get<double>());
    cam.intrinsics.validate();
    const auto& r = j.at("rotation");
    const auto& t = j.at("translation");
    if (!r.is_array() || r.size() != 9 || !t.is_array() || t.size() != 3)
        throw IoError("rotation must be 9 floats, translation 3 floats");
    for (int i = 0; i < 9; ++i) cam.rotation[i] = r[i];
    for (int i = 0; i < 3; ++i) cam.translation[i] = t[i];
    return cam;
}

CameraRecord load_camera(const std::string& path) {
    return camera_from_json(read_text_file(path));
}

std::string boxes_to_json(const BoxPairRecord& boxes) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["boxes"]["a"] = box_to_json(boxes.box_a);
    j["boxes"]["b"] = box_to_json(boxes.box_b);
    j["boxes"]["a"]["low_confidence"] = boxes.low_confidence_a;
    j["boxes"]["b"]["low_confidence"] = boxes.low_confidence_b;
    if (!boxes.meta_json.empty()) j["meta"] = parse(boxes.meta_json);
    return j.dump(2);
}

BoxPairRecord boxes_from_json(const std::string& text) {
    const json j = parse(text);
    check_version(j);
    BoxPairRecord out;
    out.box_a = box_from_json(j.at("boxes").at("a"));
    out.box_b = box_from_json(j.at("boxes").at("b"));
    out.low_confidence_a = j.at("boxes").at("a").value("low_confidence", false);
    out.low_confidence_b = j.at("boxes").at("b").value("low_confidence", false);
    if (j.contains("meta")) out.meta_json = j["meta"].dump();
    return out;
}

std::string transforms_to_json(const TransformPairRecord& t) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["a"] = transform_to_json(t.a);
    j["b"] = transform_to_json(t.b);
    j["a"]["original_size"] = {t.orig_width_a, t.orig_height_a};
    j["b"]["original_size"] = {t.orig_width_b, t.orig_height_b};
    return j.dump(2);
}

TransformPairRecord transforms_from_json(const std::string& text) {
    const json j = parse(text);
    check_version(j);
    TransformPairRecord rec;
    rec.a = transform_from_json(j.at("a"));
    rec.b = transform_from_json(j.at("b"));
    if (j.at("a").contains("original_size")) {
        rec.orig_width_a = j.at("a").at("original_size").at(0);
        rec.orig_height_a = j.at("a").at("original_size").at(1);
    }
    if (j.at("b").contains("original_size")) {
        rec.orig_width_b = j.at("b").at("original_size").at(0);
        rec.orig_height_b = j.at("b").at("original_size").at(1);
    }
    return rec;
}

void MatchRecord::validate() const {
    if (!match_valid.empty() && match_valid.size() != matches.size())
        throw InvalidInput("match validity flags do not match the match count");
    for (const auto& [ia, ib] : matches) {
        if (ia < 0 || static_cast<std::size_t>(ia) >= keypoints_a.size() || ib < 0 ||
            static_cast<std::size_t>(ib) >= keypoints_b.size())
            throw InvalidInput("match index out of range");
    }
    auto in_bounds = [](const Keypoint& k, int w, int h) {
        return k.x >= 0 && k.x <= w && k.y >= 0 && k.y <= h;
    };
    for (const auto& k : keypoints_a)
        if (!in_bounds(k, width_a, height_a)) throw InvalidInput("keypoint outside image A bounds");
    for (const auto& k : keypoints_b)
        if (!in_bounds(k, width_b, height_b)) throw InvalidInput("keypoint outside image B bounds");
}

std::string matches_to_json(const MatchRecord& rec) {
    rec.validate();
    json j;
    j["schema_version"] = kSchemaVersion;
    auto side = [](int w, int h, const std::vector<Keypoint>& kpts) {
        json s;
        s["width"] = w;
        s["height"] = h;
        s["keypoints"] = json::array();
        for (const auto& k : kpts) s["keypoints"].push_back({k.x, k.y, k.score});
        return s;
    };
    j["image_a"] = side(rec.width_a, rec.height_a, rec.keypoints_a);
    j["image_b"] = side(rec.width_b, rec.height_b, rec.keypoints_b);
    j["matches"] = json::array();
    for (const auto& [ia, ib] : rec.matches) j["matches"].push_back({ia, ib});
    if (!rec.match_valid.empty()) {
        j["match_valid"] = json::array();
        for (bool v : rec.match_valid) j["match_valid"].push_back(v);
    }
    if (!rec.descriptors_json.empty()) j["descriptors"] = parse(rec.descriptors_json);
    return j.dump(2);
}

MatchRecord matches_from_json(const std::string& text) {
    const json j = parse(text);
    check_version(j);
    MatchRecord rec;
    auto side = [](const json& s, int& w, int& h, std::vector<Keypoint>& kpts) {
        w = s.at("width");
        h = s.at("height");
        for (const auto& k : s.at("keypoints")) {
            if (!k.is_array() || k.size() < 2) throw IoError("keypoint must be [x,y(,score)]");
            kpts.push_back({k[0], k[1], k.size() > 2 ? k[2].get<double>() : 1.0});
        }
    };
    side(j.at("image_a"), rec.width_a, rec.height_a, rec.keypoints_a);
    side(j.at("image_b"), rec.width_b, rec.height_b, rec.keypoints_b);
    for (const auto& m : j.at("matches")) {
        if (!m.is_array() || m.size() != 2) throw IoError("match must be [ia,ib]");
        rec.matches.emplace_back(m[0].get<int>(), m[1].get<int>());
    }
    if (j.contains("match_valid"))
        for (const auto& v : j["match_valid"]) rec.match_valid.push_back(v.get<bool>());
    if (j.contains("descriptors")) rec.descriptors_json = j["descriptors"].dump();
    rec.validate();
    return rec;
}

MatchRecord load_matches(const std::string& path) {
    return matches_from_json(read_text_file(path));
}

namespace {

json model_to_json_obj(const model::ModelConfig& c) {
    return {{"backbone_channels", c.backbone_channels},
            {"d_model", c.d_model},
            {"msf_kernels", c.msf_kernels},
            {"msf_split", c.msf_split},
            {"encoder_iterations", c.encoder_iterations},
            {"ffn_hidden", c.ffn_hidden},
            {"centerness_channels", c.centerness_channels},
            {"decoder_layers", c.decoder_layers},
            {"single_head", c.single_head}};
}

model::ModelConfig model_from_json_obj(const json& j) {
    model::ModelConfig c;
    if (j.contains("backbone_channels"))
        c.backbone_channels = j["backbone_channels"].get<std::vector<std::size_t>>();
    if (j.contains("d_model")) c.d_model = j["d_model"];
    if (j.contains("msf_kernels")) c.msf_kernels = j["msf_kernels"].get<std::vector<std::size_t>>();
    if (j.contains("msf_split")) c.msf_split = j["msf_split"].get<std::vector<std::size_t>>();
    if (j.contains("encoder_iterations")) c.encoder_iterations = j["encoder_iterations"];
    if (j.contains("ffn_hidden")) c.ffn_hidden = j["ffn_hidden"];
    if (j.contains("centerness_channels"))
        c.centerness_channels = j["centerness_channels"].get<std::vector<std::size_t>>();
    if (j.contains("decoder_layers")) c.decoder_layers = j["decoder_layers"];
    if (j.contains("single_head")) c.single_head = j["single_head"];
    c.validate();
    return c;
}

json synth_to_json_obj(const synth::SynthConfig& c) {
    return {{"canvas_size", c.canvas_size},
            {"output_size", c.output_size},
            {"overlap_range", {c.overlap_min, c.overlap_max}},
            {"scale_range", {c.scale_min, c.scale_max}},
            {"jitter", c.jitter},
            {"seed", c.seed},
            {"octaves", c.octaves}};
}

synth::SynthConfig synth_from_json_obj(const json& j) {
    synth::SynthConfig c;
    if (j.contains("canvas_size")) c.canvas_size = j["canvas_size"];
    if (j.contains("output_size")) c.output_size = j["output_size"];
    if (j.contains("overlap_range")) {
        c.overlap_min = j["overlap_range"].at(0);
        c.overlap_max = j["overlap_range"].at(1);
    }
    if (j.contains("scale_range")) {
        c.scale_min = j["scale_range"].at(0);
        c.scale_max = j["scale_range"].at(1);
    }
    if (j.contains("jitter")) c.jitter = j["jitter"];
    if (j.contains("seed")) c.seed = j["seed"];
    if (j.contains("octaves")) c.octaves = j["octaves"];
    c.validate();
    return c;
}

json train_to_json_obj(const train::TrainConfig& c) {
    return {{"steps", c.steps},
            {"batch_size", c.batch_size},
            {"lr", c.lr},
            {"weight_decay", c.weight_decay},
            {"betas", {c.beta1, c.beta2}},
            {"adam_eps", c.adam_eps},
            {"warmup_steps", c.warmup_steps},
            {"lr_floor_frac", c.lr_floor_frac},
            {"grad_clip", c.grad_clip},
            {"eval_every", c.eval_every},
            {"eval_samples", c.eval_samples},
            {"holdout_offset", c.holdout_offset},
            {"init_seed", c.init_seed},
            {"early_stop_iou", c.early_stop_iou},
            {"loss_weights", {c.weights.con, c.weights.loc, c.weights.iou, c.weights.l1}}};
}

train::TrainConfig train_from_json_obj(const json& j) {
    train::TrainConfig c;
    if (j.contains("steps")) c.steps = j["steps"];
    if (j.contains("batch_size")) c.batch_size = j["batch_size"];
    if (j.contains("lr")) c.lr = j["lr"];
    if (j.contains("weight_decay")) c.weight_decay = j["weight_decay"];
    if (j.contains("betas")) {
        c.beta1 = j["betas"].at(0);
        c.beta2 = j["betas"].at(1);
    }
    if (j.contains("adam_eps")) c.adam_eps = j["adam_eps"];
    if (j.contains("warmup_steps")) c.warmup_steps = j["warmup_steps"];
    if (j.contains("lr_floor_frac")) c.lr_floor_frac = j["lr_floor_frac"];
    if (j.contains("grad_clip")) c.grad_clip = j["grad_clip"];
    if (j.contains("eval_every")) c.eval_every = j["eval_every"];
    if (j.contains("eval_samples")) c.eval_samples = j["eval_samples"];
    if (j.contains("holdout_offset")) c.holdout_offset = j["holdout_offset"];
    if (j.contains("init_seed")) c.init_seed = j["init_seed"];
    if (j.contains("early_stop_iou")) c.early_stop_iou = j["early_stop_iou"];
    if (j.contains("loss_weights")) {
        c.weights.con = j["loss_weights"].at(0);
        c.weights.loc = j["loss_weights"].at(1);
        c.weights.iou = j["loss_weights"].at(2);
        c.weights.l1 = j["loss_weights"].at(3);
    }
    c.validate();
    return c;
}

}  // namespace

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["model"] = model_to_json_obj(cfg.model);
    j["synth"] = synth_to_json_obj(cfg.synth);
    j["train"] = train_to_json_obj(cfg.train);
    return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
    const json j = parse(text);
    RunConfig cfg;
    if (j.contains("model")) cfg.model = model_from_json_obj(j["model"]);
    if (j.contains("synth")) cfg.synth = synth_from_json_obj(j["synth"]);
    if (j.contains("train")) cfg.train = train_from_json_obj(j["train"]);
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    return run_config_from_json(read_text_file(path));
}

std::string model_config_to_json(const model::ModelConfig& cfg) {
    return model_to_json_obj(cfg).dump(2);
}

model::ModelConfig model_config_from_json(const std::string& text) {
    return model_from_json_obj(parse(text));
}

std::string read_text_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open file: " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open file for writing: " + path);
    os << text;
}

}  // namespace oetr::schemas
