#include "dstlab/kernels.hpp"

#include <cmath>

namespace dstlab::kernels {
namespace {

void s_add(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void s_sub(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void s_mul(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void s_scale(const double* a, double c, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * c;
}

void s_axpy(double c, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += c * x[i];
}

void s_mul_acc(const double* a, const double* b, double* acc, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) acc[i] += a[i] * b[i];
}

void s_div_acc(const double* a, const double* b, double* acc, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) acc[i] += a[i] / b[i];
}

double s_dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double s_sum(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

void s_matvec(const double* w, const double* x, double* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        y[r] = s_dot(w + r * cols, x, cols);
    }
}

void s_matvec_t_acc(const double* w, const double* g, double* gx, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        s_axpy(g[r], w + r * cols, gx, cols);
    }
}

void s_outer_acc(const double* g, const double* x, double* gw, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        s_axpy(g[r], x, gw + r * cols, cols);
    }
}

void s_relu(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void s_relu_bwd(const double* x, const double* g, double* acc, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (x[i] > 0.0) acc[i] += g[i];
    }
}

void s_sigmoid(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void s_sigmoid_bwd(const double* y, const double* g, double* acc, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) acc[i] += g[i] * y[i] * (1.0 - y[i]);
}

void s_tanh(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(x[i]);
}

void s_tanh_bwd(const double* y, const double* g, double* acc, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) acc[i] += g[i] * (1.0 - y[i] * y[i]);
}

void s_log(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::log(x[i]);
}

void s_softmax_bwd(const double* y, const double* g, double s, double* acc, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) acc[i] += y[i] * (g[i] - s);
}

void s_adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                   double lr, double b1, double b2, double eps, double c1, double c2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        p[i] -= lr * (m[i] * c1) / (std::sqrt(v[i] * c2) + eps);
    }
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops table = {
        "scalar",
        s_add, s_sub, s_mul, s_scale, s_axpy, s_mul_acc, s_div_acc,
        s_dot, s_sum,
        s_matvec, s_matvec_t_acc, s_outer_acc,
        s_relu, s_relu_bwd,
        s_sigmoid, s_sigmoid_bwd,
        s_tanh, s_tanh_bwd,
        s_log, s_softmax_bwd,
        s_adam_update,
    };
    return table;
}

}  // namespace dstlab::kernels
