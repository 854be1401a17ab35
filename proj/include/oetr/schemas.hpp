#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "oetr/geometry.hpp"
#include "oetr/model.hpp"
#include "oetr/synth.hpp"
#include "oetr/train.hpp"
#include "oetr/transform.hpp"

// Structured-text (JSON) interchange schemas. Every document carries a
// schema_version field; readers reject versions they do not understand.
//
// camera:     {schema_version, intrinsics: [fx,fy,cx,cy,w,h],
//              rotation: 9 row-major floats, translation: 3 floats}
//             rotation/translation are world->camera extrinsics
//             (x_cam = R x_world + t); the relative pose A->B derived from a
//             pair maps x_B = R_rel (x_A - t_rel).
// boxes:      {schema_version, boxes: {a: {x_min,...}, b: {...}}, meta}
// transforms: {schema_version, a: {resize_ratio, pad, crop, crop_ratio}, b}
// matches:    {schema_version, image_a: {width, height, keypoints: [[x,y,score]...]},
//              image_b: {...}, matches: [[ia, ib]...], descriptors?}
namespace oetr::schemas {

inline constexpr int kSchemaVersion = 1;

struct CameraRecord {
    geometry::CameraIntrinsics intrinsics;
    geometry::Mat3 rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};  // world -> camera
    geometry::Vec3 translation{0, 0, 0};
};

std::string camera_to_json(const CameraRecord& cam);
CameraRecord camera_from_json(const std::string& text);
CameraRecord load_camera(const std::string& path);

struct BoxPairRecord {
    geometry::OverlapBox box_a;
    geometry::OverlapBox box_b;
    bool low_confidence_a = false;
    bool low_confidence_b = false;
    std::string meta_json;  // optional free-form metadata object
};

std::string boxes_to_json(const BoxPairRecord& boxes);
BoxPairRecord boxes_from_json(const std::string& text);

struct TransformPairRecord {
    pipeline::ImageTransform a;
    pipeline::ImageTransform b;
    int orig_width_a = 0, orig_height_a = 0;  // original image sizes; 0 = unknown
    int orig_width_b = 0, orig_height_b = 0;
};

std::string transforms_to_json(const TransformPairRecord& t);
TransformPairRecord transforms_from_json(const std::string& text);

struct Keypoint {
    double x = 0, y = 0;
    double score = 1.0;
};

struct MatchRecord {
    int width_a = 0, height_a = 0;
    int width_b = 0, height_b = 0;
    std::vector<Keypoint> keypoints_a;
    std::vector<Keypoint> keypoints_b;
    std::vector<std::pair<int, int>> matches;  // indices into the keypoint lists
    std::vector<bool> match_valid;             // same length as matches
    std::string descriptors_json;              // opaque payload, passed through

    void validate() const;
};

std::string matches_to_json(const MatchRecord& rec);
MatchRecord matches_from_json(const std::string& text);
MatchRecord load_matches(const std::string& path);

// Config file: one JSON object with optional "model", "synth", "train",
// "loss" sections; omitted fields keep their defaults.
struct RunConfig {
    model::ModelConfig model;
    synth::SynthConfig synth;
    train::TrainConfig train;
};

std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::string& path);

std::string model_config_to_json(const model::ModelConfig& cfg);
model::ModelConfig model_config_from_json(const std::string& text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace oetr::schemas
