#include "dstlab/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace dstlab::kernels {

const Ops* avx2_ops_table();  // defined in kernels_avx2.cpp

namespace {

bool cpu_has_avx2_fma() {
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Ops* g_active = nullptr;

const Ops* pick(std::string_view name) {
    if (name == "scalar") return &scalar_ops();
    if (name == "avx2") {
        const Ops* t = avx2_ops();
        if (t == nullptr) {
            throw std::runtime_error("kernels: avx2 backend not available on this CPU/build");
        }
        return t;
    }
    if (name == "auto" || name.empty()) {
        const Ops* t = avx2_ops();
        return t != nullptr ? t : &scalar_ops();
    }
    throw std::invalid_argument("kernels: unknown backend '" + std::string(name) + "'");
}

}  // namespace

const Ops* avx2_ops() {
    return cpu_has_avx2_fma() ? avx2_ops_table() : nullptr;
}

const Ops& active() {
    if (g_active == nullptr) {
        const char* env = std::getenv("DSTLAB_KERNELS");
        g_active = pick(env != nullptr ? std::string_view(env) : std::string_view("auto"));
    }
    return *g_active;
}

void select(std::string_view name) { g_active = pick(name); }

}  // namespace dstlab::kernels
