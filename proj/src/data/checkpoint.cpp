// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "splattrack/data/checkpoint.hpp"

#include "splattrack/core/error.hpp"
#include "splattrack/data/binary_io.hpp"

#include <json.hpp>

#include <cstring>

namespace splattrack::data {

namespace {

using nlohmann::json;

template <class Fn>
void
for_each_array(GaussianSet &g, field::DeformationField &f, Fn &&fn) {
    fn(g.positions);
    fn(g.rot_quats);
    fn(g.log_scales);
    fn(g.opacity_logits);
    fn(g.colors);
    fn(g.mask_logits);
    for (field::Plane &p : f.planes()) {
        fn(p.values);
    }
    for (field::DenseLayer &d : f.layers()) {
        fn(d.w);
        fn(d.b);
    }
}

json
vec_json(const Vec3 &v) {
    return json::array({v.x(), v.y(), v.z()});
}

} // namespace

std::vector<std::uint8_t>
encode_checkpoint(const Checkpoint &ckpt) {
    ckpt.model.gaussians.validate();
    ckpt.model.field.validate();
    const json header = {{"format", "splattrack-checkpoint"},
                         {"iteration", ckpt.iteration},
                         {"fine", ckpt.model.fine},
                         {"gaussians", ckpt.model.gaussians.size()},
                         {"field_bbox",
                          {{"min", vec_json(ckpt.model.field.bbox().lo)}, {"max", vec_json(ckpt.model.field.bbox().hi)}}},
                         {"config", json::parse(train::config_to_json(ckpt.config))}};
    const std::string text = header.dump();
    ByteWriter w;
    w.raw(kCheckpointMagic, sizeof(kCheckpointMagic));
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(text.size()));
    w.raw(text.data(), text.size());
    GaussianSet g = ckpt.model.gaussians;
    field::DeformationField f = ckpt.model.field;
    std::size_t total = 0;
    for_each_array(g, f, [&](const std::vector<double> &a) { total += a.size(); });
    w.reserve(w.bytes().size() + 4 * total);
    for_each_array(g, f, [&](const std::vector<double> &a) {
        for (double v : a) {
            w.f32(v);
        }
    });
    return w.bytes();
}

Checkpoint
decode_checkpoint(const std::vector<std::uint8_t> &bytes, const std::string &origin) {
    ByteReader r(bytes);
    if (!r.has(sizeof(kCheckpointMagic) + 8)) {
        fail(Errc::shape_mismatch, origin + ": truncated checkpoint header");
    }
    char magic[sizeof(kCheckpointMagic)];
    r.raw(magic, sizeof(magic));
    if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        fail(Errc::version_mismatch, origin + ": not a checkpoint (bad magic)");
    }
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        fail(Errc::version_mismatch, origin + ": unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint32_t len = r.u32();
    if (!r.has(len)) {
        fail(Errc::shape_mismatch, origin + ": truncated checkpoint header");
    }
    std::string text(len, '\0');
    r.raw(text.data(), len);

    Checkpoint out;
    std::size_t count = 0;
    field::Aabb box;
    try {
        const json h = json::parse(text);
        if (h.at("format") != "splattrack-checkpoint") {
            fail(Errc::version_mismatch, origin + ": unexpected format tag");
        }
        out.iteration = h.at("iteration").get<int>();
        out.model.fine = h.at("fine").get<bool>();
        count = h.at("gaussians").get<std::size_t>();
        for (int a = 0; a < 3; ++a) {
            box.lo[a] = h.at("field_bbox").at("min").at(a).get<double>();
            box.hi[a] = h.at("field_bbox").at("max").at(a).get<double>();
        }
        out.config = train::config_from_json(h.at("config").dump());
    } catch (const json::exception &e) {
        fail(Errc::invariant_violation, origin + ": bad checkpoint header: " + e.what());
    }

    out.model.gaussians = GaussianSet::with_size(count);
    out.model.field = field::DeformationField::with_shapes(out.config.field, box);
    std::size_t expected = 0;
    for_each_array(out.model.gaussians, out.model.field, [&](std::vector<double> &a) { expected += a.size(); });
    if (r.remaining() != 4 * expected) {
        fail(Errc::shape_mismatch, origin + ": payload has " + std::to_string(r.remaining()) +
                                       " bytes, header declares " + std::to_string(4 * expected));
    }
    for_each_array(out.model.gaussians, out.model.field, [&](std::vector<double> &a) {
        for (double &v : a) {
            v = r.f32();
        }
    });
    try {
        out.model.gaussians.validate();
        out.model.field.validate();
    } catch (const Error &e) {
        fail(Errc::invariant_violation, origin + ": " + e.what());
    }
    return out;
}

void
save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt) {
    write_file(path, encode_checkpoint(ckpt));
}

Checkpoint
load_checkpoint(const std::filesystem::path &path) {
    return decode_checkpoint(read_file(path), path.string());
}

} // namespace splattrack::data
