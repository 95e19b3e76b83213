#pragma once

#include <cstddef>
#include <string_view>

namespace dstlab::kernels {

// Dense double-precision inner loops behind the tape and the optimizer.
// Two interchangeable backends: a scalar reference and an AVX2/FMA variant
// picked at runtime. Equivalence between the two is covered by tests; the
// transcendental maps (sigmoid/tanh/log/exp) stay scalar in both tables so
// results differ only by reduction order in the dot-style reductions.
struct Ops {
    const char* name;

    void (*add)(const double* a, const double* b, double* out, std::size_t n);
    void (*sub)(const double* a, const double* b, double* out, std::size_t n);
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);
    void (*scale)(const double* a, double c, double* out, std::size_t n);
    // y += c * x
    void (*axpy)(double c, const double* x, double* y, std::size_t n);
    // acc += a .* b
    void (*mul_acc)(const double* a, const double* b, double* acc, std::size_t n);
    // acc += a ./ b
    void (*div_acc)(const double* a, const double* b, double* acc, std::size_t n);

    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum)(const double* a, std::size_t n);

    // y = W x, W row-major (rows x cols)
    void (*matvec)(const double* w, const double* x, double* y, std::size_t rows, std::size_t cols);
    // gx += W^T g
    void (*matvec_t_acc)(const double* w, const double* g, double* gx, std::size_t rows, std::size_t cols);
    // GW += g x^T
    void (*outer_acc)(const double* g, const double* x, double* gw, std::size_t rows, std::size_t cols);

    void (*relu)(const double* x, double* out, std::size_t n);
    void (*relu_bwd)(const double* x, const double* g, double* acc, std::size_t n);
    void (*sigmoid)(const double* x, double* out, std::size_t n);
    // acc += g .* y .* (1 - y), y = sigmoid output
    void (*sigmoid_bwd)(const double* y, const double* g, double* acc, std::size_t n);
    void (*tanh)(const double* x, double* out, std::size_t n);
    void (*tanh_bwd)(const double* y, const double* g, double* acc, std::size_t n);
    void (*log)(const double* x, double* out, std::size_t n);
    // acc += y .* (g - s), s = dot(g, y); softmax Jacobian-vector product
    void (*softmax_bwd)(const double* y, const double* g, double s, double* acc, std::size_t n);

    // Fused bias-corrected Adam step; c1 = 1/(1-b1^t), c2 = 1/(1-b2^t).
    void (*adam_update)(double* p, const double* g, double* m, double* v, std::size_t n,
                        double lr, double b1, double b2, double eps, double c1, double c2);
};

const Ops& scalar_ops();

// Null when the build or the CPU lacks AVX2+FMA.
const Ops* avx2_ops();

// Active table. Defaults to the best supported backend; the first call
// honors the DSTLAB_KERNELS environment variable ("scalar" or "avx2").
const Ops& active();

// Force a backend by name ("scalar", "avx2", "auto"). Throws on an
// unavailable or unknown name. Intended for tests and the CLI.
void select(std::string_view name);

}  // namespace dstlab::kernels
