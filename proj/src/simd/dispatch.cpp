// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "splattrack/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace splattrack::simd {

#if defined(SPLATTRACK_HAVE_AVX2_TU)
const KernelTable *avx2_kernel_table_impl();
#endif

namespace {

bool
cpu_has_avx2_fma() {
#if defined(SPLATTRACK_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable *
select_default() {
    const char *env = std::getenv("SPLATTRACK_SIMD");
    if (env != nullptr && std::string(env) == "scalar") {
        return &scalar_kernels();
    }
    if (const KernelTable *t = avx2_kernels()) {
        return t;
    }
    return &scalar_kernels();
}

std::atomic<const KernelTable *> &
active() {
    static std::atomic<const KernelTable *> table{select_default()};
    return table;
}

} // namespace

std::string_view
to_string(Isa isa) noexcept {
    switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    }
    return "unknown";
}

const KernelTable *
avx2_kernels() {
#if defined(SPLATTRACK_HAVE_AVX2_TU)
    static const bool supported = cpu_has_avx2_fma();
    return supported ? avx2_kernel_table_impl() : nullptr;
#else
    return nullptr;
#endif
}

std::vector<const KernelTable *>
available_kernels() {
    std::vector<const KernelTable *> out{&scalar_kernels()};
    if (const KernelTable *t = avx2_kernels()) {
        out.push_back(t);
    }
    return out;
}

const KernelTable &
kernels() {
    return *active().load(std::memory_order_relaxed);
}

void
set_active_kernels(const KernelTable &table) {
    active().store(&table);
}

} // namespace splattrack::simd
