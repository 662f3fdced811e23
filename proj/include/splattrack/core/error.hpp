// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace splattrack {

enum class Errc {
    invalid_parameter,
    degenerate_rotation,
    missing_tape,
    invalid_config,
    shape_mismatch,
    degenerate_scene,
    divergence,
    degenerate_model,
    missing_file,
    version_mismatch,
    invariant_violation,
    io_error,
    usage,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure raised by the library carries one of the codes above so that
/// callers (and the CLI) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string &message);

    Errc code() const noexcept { return mCode; }

private:
    Errc mCode;
};

[[noreturn]] void fail(Errc code, const std::string &message);

inline void require(bool condition, Errc code, const char *message) {
    if (!condition) {
        fail(code, message);
    }
}

} // namespace splattrack
