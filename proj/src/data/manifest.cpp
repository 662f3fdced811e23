// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "splattrack/data/manifest.hpp"

#include "splattrack/core/error.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace splattrack::data {

using nlohmann::json;

double
SceneManifest::time_of(int k) const {
    return num_timesteps <= 1 ? 0.0 : static_cast<double>(k) / (num_timesteps - 1);
}

std::vector<double>
SceneManifest::times() const {
    std::vector<double> t(num_timesteps);
    for (int k = 0; k < num_timesteps; ++k) {
        t[k] = time_of(k);
    }
    return t;
}

int
SceneManifest::camera_index(int id) const {
    for (std::size_t i = 0; i < cameras.size(); ++i) {
        if (cameras[i].id == id) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

void
SceneManifest::validate() const {
    if (version != kManifestVersion) {
        fail(Errc::version_mismatch, "manifest version " + std::to_string(version) + " is not supported");
    }
    if (num_timesteps < 1) {
        fail(Errc::invariant_violation, "manifest: num_timesteps must be at least 1");
    }
    std::set<int> ids;
    for (const CameraRecord &c : cameras) {
        if (!ids.insert(c.id).second) {
            fail(Errc::invariant_violation, "manifest: duplicate camera id " + std::to_string(c.id));
        }
        try {
            c.camera.validate();
        } catch (const Error &e) {
            fail(Errc::invariant_violation, "manifest: camera " + std::to_string(c.id) + ": " + e.what());
        }
    }
    std::set<std::pair<int, int>> seen;
    for (const FrameRecord &f : frames) {
        if (!ids.count(f.camera_id)) {
            fail(Errc::invariant_violation, "manifest: frame " + f.image_path + " references unknown camera id " +
                                                std::to_string(f.camera_id));
        }
        if (f.time_index < 0 || f.time_index >= num_timesteps) {
            fail(Errc::invariant_violation, "manifest: frame " + f.image_path + " has time_index " +
                                                std::to_string(f.time_index) + " outside [0, " +
                                                std::to_string(num_timesteps) + ")");
        }
        if (!seen.insert({f.camera_id, f.time_index}).second) {
            fail(Errc::invariant_violation, "manifest: duplicate frame for camera " + std::to_string(f.camera_id) +
                                                " at time_index " + std::to_string(f.time_index));
        }
    }
    if (!(bbox_min.array() <= bbox_max.array()).all()) {
        fail(Errc::invariant_violation, "manifest: bbox min exceeds max");
    }
}

std::string
manifest_to_json(const SceneManifest &m) {
    json j;
    j["format"] = "splattrack-scene";
    j["version"] = m.version;
    j["num_timesteps"] = m.num_timesteps;
    j["bbox"] = {{"min", {m.bbox_min.x(), m.bbox_min.y(), m.bbox_min.z()}},
                 {"max", {m.bbox_max.x(), m.bbox_max.y(), m.bbox_max.z()}}};
    json cams = json::array();
    for (const CameraRecord &c : m.cameras) {
        json w2c = json::array();
        for (int r = 0; r < 3; ++r) {
            for (int k = 0; k < 4; ++k) {
                w2c.push_back(c.camera.world_to_cam(r, k));
            }
        }
        for (double v : {0.0, 0.0, 0.0, 1.0}) {
            w2c.push_back(v);
        }
        cams.push_back({{"id", c.id},
                        {"fx", c.camera.fx},
                        {"fy", c.camera.fy},
                        {"cx", c.camera.cx},
                        {"cy", c.camera.cy},
                        {"width", c.camera.width},
                        {"height", c.camera.height},
                        {"world_to_cam", w2c},
                        {"split", c.held_out ? "test" : "train"}});
    }
    j["cameras"] = cams;
    json frames = json::array();
    for (const FrameRecord &f : m.frames) {
        json fr = {{"camera_id", f.camera_id}, {"time_index", f.time_index}, {"image", f.image_path}};
        if (f.mask_path) {
            fr["mask"] = *f.mask_path;
        }
        frames.push_back(fr);
    }
    j["frames"] = frames;
    if (m.trajectory_path) {
        j["trajectory"] = *m.trajectory_path;
    }
    return j.dump(2) + "\n";
}

SceneManifest
manifest_from_json(const std::string &text, const std::string &origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception &e) {
        fail(Errc::io_error, origin + ": malformed JSON: " + e.what());
    }
    SceneManifest m;
    try {
        m.version = j.at("version").get<int>();
        if (m.version != kManifestVersion) {
            fail(Errc::version_mismatch,
                 origin + ": manifest version " + std::to_string(m.version) + " is not supported");
        }
        m.num_timesteps = j.at("num_timesteps").get<int>();
        if (j.contains("bbox")) {
            const auto lo = j["bbox"].at("min").get<std::vector<double>>();
            const auto hi = j["bbox"].at("max").get<std::vector<double>>();
            if (lo.size() != 3 || hi.size() != 3) {
                fail(Errc::invariant_violation, origin + ": bbox corners need three values");
            }
            m.bbox_min = Vec3(lo[0], lo[1], lo[2]);
            m.bbox_max = Vec3(hi[0], hi[1], hi[2]);
        }
        for (const json &c : j.at("cameras")) {
            CameraRecord rec;
            rec.id = c.at("id").get<int>();
            rec.camera.fx = c.at("fx").get<double>();
            rec.camera.fy = c.at("fy").get<double>();
            rec.camera.cx = c.at("cx").get<double>();
            rec.camera.cy = c.at("cy").get<double>();
            rec.camera.width = c.at("width").get<int>();
            rec.camera.height = c.at("height").get<int>();
            const auto w2c = c.at("world_to_cam").get<std::vector<double>>();
            if (w2c.size() != 16) {
                fail(Errc::invariant_violation,
                     origin + ": camera " + std::to_string(rec.id) + " world_to_cam needs 16 values");
            }
            if (w2c[12] != 0.0 || w2c[13] != 0.0 || w2c[14] != 0.0 || w2c[15] != 1.0) {
                fail(Errc::invariant_violation,
                     origin + ": camera " + std::to_string(rec.id) + " world_to_cam last row must be 0 0 0 1");
            }
            for (int r = 0; r < 3; ++r) {
                for (int k = 0; k < 4; ++k) {
                    rec.camera.world_to_cam(r, k) = w2c[4 * r + k];
                }
            }
            rec.held_out = c.value("split", std::string("train")) == "test";
            m.cameras.push_back(rec);
        }
        for (const json &f : j.at("frames")) {
            FrameRecord rec;
            rec.camera_id = f.at("camera_id").get<int>();
            rec.time_index = f.at("time_index").get<int>();
            rec.image_path = f.at("image").get<std::string>();
            if (f.contains("mask")) {
                rec.mask_path = f["mask"].get<std::string>();
            }
            m.frames.push_back(rec);
        }
        if (j.contains("trajectory")) {
            m.trajectory_path = j["trajectory"].get<std::string>();
        }
    } catch (const json::exception &e) {
        fail(Errc::invariant_violation, origin + ": " + e.what());
    }
    m.validate();
    return m;
}

void
save_manifest(const std::filesystem::path &path, const SceneManifest &manifest) {
    manifest.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        fail(Errc::io_error, "cannot write " + path.string());
    }
    out << manifest_to_json(manifest);
    if (!out) {
        fail(Errc::io_error, "cannot write " + path.string());
    }
}

SceneManifest
load_manifest(const std::filesystem::path &path) {
    if (!std::filesystem::exists(path)) {
        fail(Errc::missing_file, "missing manifest: " + path.string());
    }
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return manifest_from_json(ss.str(), path.string());
}

} // namespace splattrack::data
