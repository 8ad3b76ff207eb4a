#include "dflopt/kernels.hpp"

#include <cstdlib>

#include "dflopt/errors.hpp"

namespace dflopt::kern {

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

#if !(defined(__x86_64__) || defined(_M_X64))
const Ops& avx2_ops() {
    throw runtime_error("avx2 kernels are not built on this architecture");
}
#endif

namespace {

const Ops* pick_default() {
    if (const char* env = std::getenv("DFLOPT_KERNELS")) {
        std::string want(env);
        if (want == "scalar") return &scalar_ops();
        if (want == "avx2") {
            if (!avx2_available())
                throw runtime_error("DFLOPT_KERNELS=avx2 but CPU lacks avx2/fma");
            return &avx2_ops();
        }
        if (!want.empty())
            throw runtime_error("unknown DFLOPT_KERNELS value: " + want);
    }
    return avx2_available() ? &avx2_ops() : &scalar_ops();
}

const Ops*& active_slot() {
    static const Ops* active = pick_default();
    return active;
}

} // namespace

const Ops& ops() { return *active_slot(); }

void force_backend(const std::string& name) {
    if (name.empty()) {
        active_slot() = pick_default();
    } else if (name == "scalar") {
        active_slot() = &scalar_ops();
    } else if (name == "avx2") {
        if (!avx2_available())
            throw runtime_error("cannot force avx2 kernels: unsupported CPU");
        active_slot() = &avx2_ops();
    } else {
        throw runtime_error("unknown kernel backend: " + name);
    }
}

} // namespace dflopt::kern
