// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "splattrack/core/error.hpp"

namespace splattrack {

std::string_view
to_string(Errc code) noexcept {
    switch (code) {
    case Errc::invalid_parameter: return "invalid-parameter";
    case Errc::degenerate_rotation: return "degenerate-rotation";
    case Errc::missing_tape: return "missing-tape";
    case Errc::invalid_config: return "invalid-config";
    case Errc::shape_mismatch: return "shape-mismatch";
    case Errc::degenerate_scene: return "degenerate-scene";
    case Errc::divergence: return "divergence";
    case Errc::degenerate_model: return "degenerate-model";
    case Errc::missing_file: return "missing-file";
    case Errc::version_mismatch: return "version-mismatch";
    case Errc::invariant_violation: return "invariant-violation";
    case Errc::io_error: return "io-error";
    case Errc::usage: return "usage";
    }
    return "unknown";
}

Error::Error(Errc code, const std::string &message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), mCode(code) {}

void
fail(Errc code, const std::string &message) {
    throw Error(code, message);
}

} // namespace splattrack
