// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "splattrack/data/scene_gen.hpp"

#include "splattrack/core/error.hpp"
#include "splattrack/core/parallel.hpp"
#include "splattrack/data/png_io.hpp"
#include "splattrack/data/trajectory_io.hpp"
#include "splattrack/train/render_pipeline.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace splattrack::data {

namespace {

constexpr double kPi = std::numbers::pi;

// The sheet is centred slightly off the sphere axis so the drape is not
// perfectly symmetric.
const Vec2 kSheetCentre(0.04, -0.03);
constexpr double kDropStartHeight = 0.85;
constexpr double kContactGap = 0.012;
constexpr double kContactTime = 0.35;
constexpr double kMaxWrapAngle = 75.0 * kPi / 180.0;
constexpr double kRestingHeight = 0.06;
constexpr double kCameraDistance = 2.8;
const Vec3 kLookAt(0.0, 0.0, 0.35);

double
grid_coord(int i, int n) {
    return static_cast<double>(i) / static_cast<double>(n - 1);
}

/// Point at arc length s along the draped profile: a spherical cap up to
/// polar angle phi, its tangent line below that, then the resting plane.
/// Returns (horizontal radius, height).
Vec2
drape_profile(double s, double phi) {
    const double radius = kSphereRadius + kContactGap;
    const double centre = kSphereRadius;
    const double cap = radius * phi;
    if (s <= cap) {
        const double th = s / radius;
        return {radius * std::sin(th), centre + radius * std::cos(th)};
    }
    const Vec2 start(radius * std::sin(phi), centre + radius * std::cos(phi));
    const Vec2 dir(std::cos(phi), -std::sin(phi));
    const double rest = s - cap;
    if (dir.y() > -1e-12) {
        return start + rest * dir;
    }
    const double line = (start.y() - kRestingHeight) / -dir.y();
    if (rest <= line) {
        return start + rest * dir;
    }
    return {start.x() + line * dir.x() + (rest - line), kRestingHeight};
}

Vec3
drop_on_sphere(double x, double y, double t) {
    if (t <= kContactTime) {
        const double top = 2 * kSphereRadius + kContactGap;
        const double u = t / kContactTime;
        return {x, y, kDropStartHeight - (kDropStartHeight - top) * u * u};
    }
    const double u = (t - kContactTime) / (1.0 - kContactTime);
    const double phi = kMaxWrapAngle * u * (2.0 - u);
    const double r = std::hypot(x, y);
    const Vec2 p = drape_profile(r, phi);
    if (r < 1e-15) {
        return {x, y, p.y()};
    }
    return {x / r * p.x(), y / r * p.x(), p.y()};
}

Vec3
wave(double x, double y, double along, double t) {
    const double phase = 2 * kPi * (along / kWaveLength - t) + kPi / 2;
    return {x, y, kWaveRestHeight + kWaveAmplitude * std::sin(phase)};
}

/// Per-channel value noise in [-1,1] constant over blocks of `cell` grid points.
class BlockNoise {
public:
    BlockNoise(std::mt19937_64 &rng, int n, int cell) : mCell(cell), mBlocks((n + cell - 1) / cell) {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        mValues.resize(static_cast<std::size_t>(mBlocks * mBlocks * 3));
        for (double &v : mValues) {
            v = u(rng);
        }
    }
    double at(int i, int j, int c) const {
        const int bi = i / mCell, bj = j / mCell;
        return mValues[static_cast<std::size_t>((bi * mBlocks + bj) * 3 + c)];
    }

private:
    int mCell;
    int mBlocks;
    std::vector<double> mValues;
};

std::vector<double>
sheet_colors(const SceneSpec &spec) {
    const int n = spec.grid_res;
    std::mt19937_64 rng(spec.seed * 2654435761ULL + 17);
    const BlockNoise fine(rng, n, 2), coarse(rng, n, 5);
    std::vector<double> colors(static_cast<std::size_t>(3 * n * n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const std::size_t o = static_cast<std::size_t>(3 * (i * n + j));
            for (int c = 0; c < 3; ++c) {
                double v = 0.5;
                switch (spec.texture) {
                case Texture::noise:
                    v = 0.5 + 0.45 * (0.6 * fine.at(i, j, c) + 0.4 * coarse.at(i, j, c));
                    break;
                case Texture::checker: {
                    const bool odd = ((i / 5) + (j / 5)) % 2 == 1;
                    const double a[3] = {0.9, 0.85, 0.2}, b[3] = {0.1, 0.2, 0.7};
                    v = odd ? a[c] : b[c];
                    break;
                }
                case Texture::half_uniform: {
                    const double flat[3] = {0.8, 0.3, 0.3};
                    v = 2 * j < n ? 0.5 + 0.45 * (0.6 * fine.at(i, j, c) + 0.4 * coarse.at(i, j, c)) : flat[c];
                    break;
                }
                }
                colors[o + c] = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return colors;
}

std::string
frame_name(const char *dir, int camera, int k) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s/cam%02d_t%03d.png", dir, camera, k);
    return buf;
}

} // namespace

std::string
to_string(Deformation d) {
    switch (d) {
    case Deformation::none:
        return "none";
    case Deformation::wave:
        return "wave";
    case Deformation::drop_on_sphere:
        return "drop_on_sphere";
    }
    return "none";
}

std::string
to_string(Texture t) {
    switch (t) {
    case Texture::noise:
        return "noise";
    case Texture::checker:
        return "checker";
    case Texture::half_uniform:
        return "half_uniform";
    }
    return "noise";
}

Deformation
parse_deformation(const std::string &name) {
    for (Deformation d : {Deformation::none, Deformation::wave, Deformation::drop_on_sphere}) {
        if (to_string(d) == name) {
            return d;
        }
    }
    fail(Errc::invalid_parameter, "unknown deformation '" + name + "' (none, wave, drop_on_sphere)");
}

Texture
parse_texture(const std::string &name) {
    for (Texture t : {Texture::noise, Texture::checker, Texture::half_uniform}) {
        if (to_string(t) == name) {
            return t;
        }
    }
    fail(Errc::invalid_parameter, "unknown texture '" + name + "' (noise, checker, half_uniform)");
}

void
SceneSpec::validate() const {
    if (grid_res < 8) {
        fail(Errc::invalid_parameter, "scene: grid_res must be at least 8");
    }
    if (num_cameras < 4) {
        fail(Errc::invalid_parameter, "scene: num_cameras must be at least 4");
    }
    if (held_out_cameras < 0) {
        fail(Errc::invalid_parameter, "scene: held_out_cameras must be non-negative");
    }
    if (num_timesteps < 1) {
        fail(Errc::invalid_parameter, "scene: num_timesteps must be at least 1");
    }
    if (image_size < 8) {
        fail(Errc::invalid_parameter, "scene: image_size must be at least 8");
    }
    if (ground_res < 0 || ground_res == 1) {
        fail(Errc::invalid_parameter, "scene: ground_res must be 0 or at least 2");
    }
}

std::vector<double>
sheet_positions(const SceneSpec &spec, double t) {
    const int n = spec.grid_res;
    std::vector<double> out(static_cast<std::size_t>(3 * n * n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double along = grid_coord(j, n) * kSheetSize;
            const double x = kSheetCentre.x() - kSheetSize / 2 + along;
            const double y = kSheetCentre.y() - kSheetSize / 2 + grid_coord(i, n) * kSheetSize;
            Vec3 p(x, y, kWaveRestHeight);
            switch (spec.deformation) {
            case Deformation::none:
                break;
            case Deformation::wave:
                p = wave(x, y, along, t);
                break;
            case Deformation::drop_on_sphere:
                p = drop_on_sphere(x, y, t);
                break;
            }
            const std::size_t o = static_cast<std::size_t>(3 * (i * n + j));
            out[o] = p.x();
            out[o + 1] = p.y();
            out[o + 2] = p.z();
        }
    }
    return out;
}

TrajectorySet
sheet_trajectories(const SceneSpec &spec) {
    spec.validate();
    const std::size_t p = static_cast<std::size_t>(spec.grid_res) * spec.grid_res;
    const std::size_t steps = static_cast<std::size_t>(spec.num_timesteps);
    TrajectorySet traj = TrajectorySet::with_size(p, steps);
    SceneManifest timing;
    timing.num_timesteps = spec.num_timesteps;
    for (std::size_t k = 0; k < steps; ++k) {
        traj.times[k] = timing.time_of(static_cast<int>(k));
        const std::vector<double> pos = sheet_positions(spec, traj.times[k]);
        for (std::size_t i = 0; i < p; ++i) {
            traj.set(i, k, Vec3(pos[3 * i], pos[3 * i + 1], pos[3 * i + 2]));
        }
    }
    return traj;
}

GaussianSet
scene_gaussians(const SceneSpec &spec, double t) {
    spec.validate();
    const int n = spec.grid_res, g = spec.ground_res;
    const std::size_t sheet = static_cast<std::size_t>(n) * n;
    const std::size_t ground = static_cast<std::size_t>(g) * g;
    GaussianSet set = GaussianSet::with_size(sheet + ground);
    const std::vector<double> pos = sheet_positions(spec, t);
    const std::vector<double> colors = sheet_colors(spec);
    const double spacing = kSheetSize / (n - 1);
    auto at = [&](int i, int j) {
        const std::size_t o = static_cast<std::size_t>(3 * (i * n + j));
        return Vec3(pos[o], pos[o + 1], pos[o + 2]);
    };
    // Flat splats in the local sheet frame, so the rendered surface is the
    // material surface the trajectories describe.
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const std::size_t k = static_cast<std::size_t>(i * n + j);
            const Vec3 du = at(i, std::min(j + 1, n - 1)) - at(i, std::max(j - 1, 0));
            const Vec3 dv = at(std::min(i + 1, n - 1), j) - at(std::max(i - 1, 0), j);
            Mat3 frame;
            frame.col(0) = du.normalized();
            frame.col(2) = du.cross(dv).normalized();
            frame.col(1) = frame.col(2).cross(frame.col(0));
            const Eigen::Quaterniond q(frame);
            set.set_position(k, at(i, j));
            set.set_rotation(k, Vec4(q.w(), q.x(), q.y(), q.z()));
            set.log_scales[3 * k] = std::log(0.6 * spacing);
            set.log_scales[3 * k + 1] = std::log(0.6 * spacing);
            set.log_scales[3 * k + 2] = std::log(0.1 * spacing);
            for (int c = 0; c < 3; ++c) {
                set.colors[3 * k + c] = colors[3 * k + c];
            }
            set.opacity_logits[k] = 5.0;
            set.mask_logits[k] = 30.0;
        }
    }
    if (g > 0) {
        std::mt19937_64 rng(spec.seed * 6364136223846793005ULL + 99);
        const BlockNoise noise(rng, g, 2);
        const double cell = kGroundSize / (g - 1);
        for (int i = 0; i < g; ++i) {
            for (int j = 0; j < g; ++j) {
                const std::size_t k = sheet + static_cast<std::size_t>(i * g + j);
                set.set_position(k, Vec3(-kGroundSize / 2 + j * cell, -kGroundSize / 2 + i * cell, 0.0));
                set.set_rotation(k, Vec4(1, 0, 0, 0));
                set.log_scales[3 * k] = std::log(0.6 * cell);
                set.log_scales[3 * k + 1] = std::log(0.6 * cell);
                set.log_scales[3 * k + 2] = std::log(0.06 * cell);
                const double base[3] = {0.3, 0.4, 0.3};
                for (int c = 0; c < 3; ++c) {
                    set.colors[3 * k + c] = std::clamp(base[c] + 0.2 * noise.at(i, j, c), 0.0, 1.0);
                }
                set.opacity_logits[k] = 5.0;
                set.mask_logits[k] = -30.0;
            }
        }
    }
    return set;
}

std::vector<CameraRecord>
scene_cameras(const SceneSpec &spec) {
    spec.validate();
    const double f = 1.65 * spec.image_size;
    const double c = spec.image_size / 2.0;
    auto make = [&](int id, double elevation, double azimuth, bool held_out) {
        const Vec3 eye = kLookAt + kCameraDistance * Vec3(std::cos(elevation) * std::cos(azimuth),
                                                          std::cos(elevation) * std::sin(azimuth),
                                                          std::sin(elevation));
        CameraRecord rec;
        rec.id = id;
        rec.camera = Camera::look_at(eye, kLookAt, Vec3(0, 0, 1), f, f, c, c, spec.image_size, spec.image_size);
        rec.held_out = held_out;
        return rec;
    };
    std::vector<CameraRecord> cams;
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < spec.num_cameras; ++k) {
        const double elevation = (20.0 + 50.0 * (k + 0.5) / spec.num_cameras) * kPi / 180.0;
        cams.push_back(make(k, elevation, k * golden, false));
    }
    for (int k = 0; k < spec.held_out_cameras; ++k) {
        const double azimuth = (60.0 + 360.0 * k / spec.held_out_cameras) * kPi / 180.0;
        cams.push_back(make(spec.num_cameras + k, 45.0 * kPi / 180.0, azimuth, true));
    }
    return cams;
}

SceneManifest
generate_scene(const SceneSpec &spec, const std::filesystem::path &dir) {
    spec.validate();
    std::error_code ec;
    std::filesystem::create_directories(dir / "images", ec);
    if (!ec) {
        std::filesystem::create_directories(dir / "masks", ec);
    }
    if (ec) {
        fail(Errc::io_error, "cannot create output directory " + dir.string() + ": " + ec.message());
    }

    SceneManifest m;
    m.num_timesteps = spec.num_timesteps;
    m.cameras = scene_cameras(spec);
    const TrajectorySet truth = sheet_trajectories(spec);

    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (std::size_t i = 0; i < truth.num_points; ++i) {
        for (std::size_t k = 0; k < truth.num_steps; ++k) {
            lo = lo.cwiseMin(truth.at(i, k));
            hi = hi.cwiseMax(truth.at(i, k));
        }
    }
    if (spec.ground_res > 0) {
        lo = lo.cwiseMin(Vec3(-kGroundSize / 2, -kGroundSize / 2, 0.0));
        hi = hi.cwiseMax(Vec3(kGroundSize / 2, kGroundSize / 2, 0.0));
    }
    m.bbox_min = lo - Vec3::Constant(0.05);
    m.bbox_max = hi + Vec3::Constant(0.05);

    const std::size_t cams = m.cameras.size();
    const std::size_t steps = static_cast<std::size_t>(spec.num_timesteps);
    for (std::size_t k = 0; k < steps; ++k) {
        for (std::size_t c = 0; c < cams; ++c) {
            FrameRecord fr;
            fr.camera_id = m.cameras[c].id;
            fr.time_index = static_cast<int>(k);
            fr.image_path = frame_name("images", fr.camera_id, fr.time_index);
            fr.mask_path = frame_name("masks", fr.camera_id, fr.time_index);
            m.frames.push_back(fr);
        }
    }
    std::vector<GaussianSet> sets(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        sets[k] = scene_gaussians(spec, truth.times[k]);
    }
    parallel_for_chunks(m.frames.size(), 1, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t f = begin; f < end; ++f) {
            const FrameRecord &fr = m.frames[f];
            const GaussianSet &set = sets[static_cast<std::size_t>(fr.time_index)];
            const Camera &cam = m.cameras[static_cast<std::size_t>(m.camera_index(fr.camera_id))].camera;
            const train::RenderPass pass = train::render_state(set, train::canonical_state(set), cam, Vec3::Zero());
            write_png(dir / fr.image_path, Image::from_unit(pass.output.rgb, cam.width, cam.height, 3));
            std::vector<double> mask(pass.output.mask.size());
            for (std::size_t p = 0; p < mask.size(); ++p) {
                mask[p] = pass.output.mask[p] > 0.5 ? 1.0 : 0.0;
            }
            write_png(dir / *fr.mask_path, Image::from_unit(mask, cam.width, cam.height, 1));
        }
    });
    m.trajectory_path = "trajectories.bin";
    write_trajectories(dir / *m.trajectory_path, truth);
    m.validate();
    save_manifest(dir / kManifestFile, m);
    return m;
}

} // namespace splattrack::data
