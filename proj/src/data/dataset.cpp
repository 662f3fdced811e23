// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "splattrack/data/dataset.hpp"

#include "splattrack/core/error.hpp"
#include "splattrack/data/png_io.hpp"

namespace splattrack::data {

std::vector<std::size_t>
SceneDataset::training_frames() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (!held_out(frames[i])) {
            out.push_back(i);
        }
    }
    return out;
}

std::vector<std::size_t>
SceneDataset::held_out_frames() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (held_out(frames[i])) {
            out.push_back(i);
        }
    }
    return out;
}

SceneDataset
load_dataset(const std::filesystem::path &dir) {
    SceneDataset ds;
    ds.root = dir;
    ds.manifest = load_manifest(dir / kManifestFile);
    for (const FrameRecord &rec : ds.manifest.frames) {
        FrameData f;
        f.camera = static_cast<std::size_t>(ds.manifest.camera_index(rec.camera_id));
        f.time_index = rec.time_index;
        const Camera &cam = ds.manifest.cameras[f.camera].camera;
        const Image img = read_png(dir / rec.image_path);
        if (img.width != cam.width || img.height != cam.height || img.channels != 3) {
            fail(Errc::shape_mismatch, rec.image_path + ": expected " + std::to_string(cam.width) + "x" +
                                           std::to_string(cam.height) + " RGB, found " + std::to_string(img.width) +
                                           "x" + std::to_string(img.height) + " with " +
                                           std::to_string(img.channels) + " channels");
        }
        f.rgb = img.to_unit();
        if (rec.mask_path) {
            const Image mask = read_png(dir / *rec.mask_path);
            if (mask.width != cam.width || mask.height != cam.height || mask.channels != 1) {
                fail(Errc::shape_mismatch, *rec.mask_path + ": mask size or channel count does not match camera " +
                                               std::to_string(rec.camera_id));
            }
            f.mask.resize(mask.pixels.size());
            for (std::size_t i = 0; i < mask.pixels.size(); ++i) {
                f.mask[i] = mask.pixels[i] >= 128 ? 1.0 : 0.0;
            }
        }
        ds.frames.push_back(std::move(f));
    }
    if (ds.frames.empty()) {
        fail(Errc::invariant_violation, (dir / kManifestFile).string() + ": dataset has no frames");
    }
    return ds;
}

} // namespace splattrack::data
