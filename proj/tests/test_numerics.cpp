#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dstlab/optim.hpp"
#include "dstlab/rng.hpp"
#include "dstlab/tape.hpp"
#include "dstlab/tensor.hpp"

using namespace dstlab;

namespace {

Tensor random_tensor(Rng& rng, std::vector<std::int64_t> shape, double s = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) {
        t[static_cast<std::size_t>(i)] = s * rng.normal();
    }
    return t;
}

// Independent scalar recomputation of cosine similarity.
double cosine_oracle(const std::vector<double>& u, const std::vector<double>& v, double eps = 1e-8) {
    double d = 0, nu = 0, nv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        d += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    return d / (std::sqrt(nu) * std::sqrt(nv) + eps);
}

}  // namespace

TEST_CASE("cosine similarity") {
    Tape t;
    SUBCASE("self similarity is 1 up to the eps_div deviation") {
        NodeId u = t.leaf(Tensor::from_vector({1, 2}));
        NodeId v = t.leaf(Tensor::from_vector({1, 2}));
        // denominator is ||u||*||v|| + 1e-8, so the deviation is eps/(u.v) = 2e-9
        CHECK(std::abs(t.value_scalar(t.cosine(u, v)) - 1.0) <= 2.5e-9);
    }
    SUBCASE("orthogonal vectors give 0") {
        NodeId u = t.leaf(Tensor::from_vector({1, 0}));
        NodeId v = t.leaf(Tensor::from_vector({0, 1}));
        CHECK(t.value_scalar(t.cosine(u, v)) == doctest::Approx(0.0));
    }
    SUBCASE("matches scalar recomputation on random length-8 vectors") {
        Rng rng(11);
        std::vector<double> u(8), v(8);
        for (auto& x : u) x = rng.uniform(-3, 3);
        for (auto& x : v) x = rng.uniform(-3, 3);
        NodeId nu = t.leaf(Tensor::from_vector(u));
        NodeId nv = t.leaf(Tensor::from_vector(v));
        CHECK(t.value_scalar(t.cosine(nu, nv)) == doctest::Approx(cosine_oracle(u, v)).epsilon(1e-12));
    }
    SUBCASE("shape mismatch is rejected") {
        NodeId u = t.leaf(Tensor::from_vector({1, 2}));
        NodeId v = t.leaf(Tensor::from_vector({1, 2, 3}));
        CHECK_THROWS_AS(t.cosine(u, v), std::invalid_argument);
    }
}

TEST_CASE("softmax") {
    Tape t;
    SUBCASE("uniform on equal inputs") {
        NodeId x = t.leaf(Tensor::from_vector({0, 0, 0, 0}));
        auto y = t.values(t.softmax(x));
        for (double p : y) CHECK(p == doctest::Approx(0.25));
    }
    SUBCASE("shift invariance and normalization") {
        Rng rng(3);
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<double> x(5);
            for (auto& e : x) e = rng.uniform(-4, 4);
            const double c = rng.uniform(-50, 50);
            std::vector<double> xs = x;
            for (auto& e : xs) e += c;
            Tape tp;
            auto a = tp.values(tp.softmax(tp.leaf(Tensor::from_vector(x))));
            auto b = tp.values(tp.softmax(tp.leaf(Tensor::from_vector(xs))));
            double suma = 0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                CHECK(std::abs(a[i] - b[i]) < 1e-9);
                CHECK(a[i] > 0.0);
                suma += a[i];
            }
            CHECK(std::abs(suma - 1.0) < 1e-12);
        }
    }
    SUBCASE("no overflow on extreme logits") {
        NodeId x = t.leaf(Tensor::from_vector({1000, 0}));
        auto y = t.values(t.softmax(x));
        CHECK(std::abs(y[0] - 1.0) < 1e-12);
        CHECK(std::abs(y[1]) < 1e-12);
    }
    SUBCASE("empty input is unconstructible") {
        CHECK_THROWS_AS(Tensor::from_vector({}), std::invalid_argument);
    }
}

namespace {

GruNodes leaf_gru(Tape& t, int in, int hid, Rng* rng) {
    auto mk = [&](std::int64_t r, std::int64_t c) {
        Tensor m = Tensor::zeros({r, c});
        if (rng != nullptr) {
            for (std::int64_t i = 0; i < m.size(); ++i) m[static_cast<std::size_t>(i)] = rng->normal();
        }
        return t.leaf(m, true);
    };
    auto mkb = [&](std::int64_t n) {
        Tensor b = Tensor::zeros({n});
        if (rng != nullptr) {
            for (std::int64_t i = 0; i < n; ++i) b[static_cast<std::size_t>(i)] = rng->normal();
        }
        return t.leaf(b, true);
    };
    GruNodes g;
    g.wz = mk(hid, in); g.uz = mk(hid, hid); g.bz = mkb(hid);
    g.wr = mk(hid, in); g.ur = mk(hid, hid); g.br = mkb(hid);
    g.wh = mk(hid, in); g.uh = mk(hid, hid); g.bh = mkb(hid);
    return g;
}

// Plain double-loop recomputation of the GRU recurrence.
std::vector<double> gru_oracle(const std::vector<std::vector<double>>& wz, const std::vector<std::vector<double>>& uz, const std::vector<double>& bz,
                               const std::vector<std::vector<double>>& wr, const std::vector<std::vector<double>>& ur, const std::vector<double>& br,
                               const std::vector<std::vector<double>>& wh, const std::vector<std::vector<double>>& uh, const std::vector<double>& bh,
                               const std::vector<double>& x, const std::vector<double>& h) {
    const std::size_t hid = bz.size();
    auto matv = [](const std::vector<std::vector<double>>& m, const std::vector<double>& v) {
        std::vector<double> out(m.size(), 0.0);
        for (std::size_t i = 0; i < m.size(); ++i) {
            for (std::size_t j = 0; j < v.size(); ++j) out[i] += m[i][j] * v[j];
        }
        return out;
    };
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    std::vector<double> z(hid), r(hid), hc(hid), out(hid);
    auto wzx = matv(wz, x), uzh = matv(uz, h), wrx = matv(wr, x), urh = matv(ur, h);
    for (std::size_t i = 0; i < hid; ++i) {
        z[i] = sig(wzx[i] + uzh[i] + bz[i]);
        r[i] = sig(wrx[i] + urh[i] + br[i]);
    }
    std::vector<double> rh(hid);
    for (std::size_t i = 0; i < hid; ++i) rh[i] = r[i] * h[i];
    auto whx = matv(wh, x), uhrh = matv(uh, rh);
    for (std::size_t i = 0; i < hid; ++i) {
        hc[i] = std::tanh(whx[i] + uhrh[i] + bh[i]);
        out[i] = (1.0 - z[i]) * h[i] + z[i] * hc[i];
    }
    return out;
}

}  // namespace

TEST_CASE("gru cell") {
    SUBCASE("zero parameters halve the previous hidden state exactly") {
        Tape t;
        GruNodes g = leaf_gru(t, 3, 2, nullptr);
        NodeId x = t.leaf(Tensor::from_vector({0.3, -0.7, 2.0}));
        NodeId h = t.leaf(Tensor::from_vector({1.0, -2.0}));
        auto out = t.values(gru_cell(t, x, h, g));
        CHECK(out[0] == 0.5);
        CHECK(out[1] == -1.0);
    }
    SUBCASE("saturated update gate with zero candidate weights clears the state") {
        Tape t;
        GruNodes g = leaf_gru(t, 2, 3, nullptr);
        Tensor bz = Tensor::zeros({3});
        bz.fill(40.0);
        g.bz = t.leaf(bz, true);
        NodeId x = t.leaf(Tensor::from_vector({1.0, 1.0}));
        NodeId h = t.leaf(Tensor::from_vector({0.9, -0.4, 0.2}));
        auto out = t.values(gru_cell(t, x, h, g));
        for (double v : out) CHECK(std::abs(v) < 1e-12);
    }
    SUBCASE("random parameters match a scalar recomputation, dims 4 -> 3") {
        Rng rng(101);
        auto mat = [&](std::size_t r, std::size_t c) {
            std::vector<std::vector<double>> m(r, std::vector<double>(c));
            for (auto& row : m) {
                for (auto& v : row) v = rng.normal();
            }
            return m;
        };
        auto vec = [&](std::size_t n) {
            std::vector<double> v(n);
            for (auto& e : v) e = rng.normal();
            return v;
        };
        auto wz = mat(3, 4), uz = mat(3, 3), wr = mat(3, 4), ur = mat(3, 3), wh = mat(3, 4), uh = mat(3, 3);
        auto bz = vec(3), br = vec(3), bh = vec(3), x = vec(4), h = vec(3);

        Tape t;
        auto to_mat = [&](const std::vector<std::vector<double>>& m) {
            std::vector<double> flat;
            for (const auto& row : m) flat.insert(flat.end(), row.begin(), row.end());
            return t.leaf(Tensor::from_matrix(static_cast<std::int64_t>(m.size()),
                                              static_cast<std::int64_t>(m[0].size()), flat));
        };
        GruNodes g{to_mat(wz), to_mat(uz), t.leaf(Tensor::from_vector(bz)),
                   to_mat(wr), to_mat(ur), t.leaf(Tensor::from_vector(br)),
                   to_mat(wh), to_mat(uh), t.leaf(Tensor::from_vector(bh))};
        auto out = t.values(gru_cell(t, t.leaf(Tensor::from_vector(x)), t.leaf(Tensor::from_vector(h)), g));
        auto expect = gru_oracle(wz, uz, bz, wr, ur, br, wh, uh, bh, x, h);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-12));
        }
    }
    SUBCASE("dimension mismatch is rejected") {
        Tape t;
        GruNodes g = leaf_gru(t, 3, 2, nullptr);
        NodeId x = t.leaf(Tensor::from_vector({1.0, 2.0}));  // wrong input dim
        NodeId h = t.leaf(Tensor::from_vector({0.0, 0.0}));
        CHECK_THROWS_AS(gru_cell(t, x, h, g), std::invalid_argument);
    }
}

TEST_CASE("backward") {
    SUBCASE("linear graph y = 3p") {
        Tape t;
        NodeId p = t.leaf(Tensor::scalar(2.0), true);
        NodeId y = t.scale(p, 3.0);
        t.backward(y);
        CHECK(t.grad_tensor(p).as_scalar() == 3.0);
    }
    SUBCASE("unreachable parameter gets exactly zero") {
        Tape t;
        NodeId p = t.leaf(Tensor::scalar(2.0), true);
        NodeId q = t.leaf(Tensor::scalar(5.0), true);
        NodeId y = t.scale(p, 3.0);
        t.backward(y);
        CHECK_FALSE(t.grad_defined(q));
        CHECK(t.grad_tensor(q).as_scalar() == 0.0);
    }
    SUBCASE("seed must be scalar") {
        Tape t;
        NodeId p = t.leaf(Tensor::from_vector({1, 2}));
        CHECK_THROWS_AS(t.backward(p), std::invalid_argument);
    }
}

TEST_CASE("finite difference gradient") {
    SUBCASE("quadratic") {
        Tensor p = Tensor::scalar(3.0);
        Tensor* ptr = &p;
        auto f = [&]() { return p.as_scalar() * p.as_scalar(); };
        auto g = finite_difference_gradient(f, std::span<Tensor* const>(&ptr, 1), 1e-5);
        CHECK(g[0].as_scalar() == doctest::Approx(6.0).epsilon(1e-6));
        CHECK(p.as_scalar() == 3.0);
    }
    SUBCASE("constant function") {
        Tensor p = Tensor::from_vector({1, 2, 3});
        Tensor* ptr = &p;
        auto g = finite_difference_gradient([]() { return 4.2; }, std::span<Tensor* const>(&ptr, 1), 1e-5);
        for (std::int64_t i = 0; i < 3; ++i) {
            CHECK(std::abs(g[0][static_cast<std::size_t>(i)]) < 1e-9);
        }
    }
    SUBCASE("non-finite objective reports a numerical failure") {
        Tensor p = Tensor::scalar(0.0);
        Tensor* ptr = &p;
        auto f = [&]() { return std::log(p.as_scalar()); };
        CHECK_THROWS_AS(finite_difference_gradient(f, std::span<Tensor* const>(&ptr, 1), 1e-5),
                        std::runtime_error);
    }
}

namespace {

// Builds a small random graph over the given parameters and returns the
// scalar objective value. Structure is fixed by `variant`.
double build_objective(Tape& t, std::span<Tensor* const> params, int variant,
                       std::vector<NodeId>* param_nodes = nullptr) {
    std::vector<NodeId> ids;
    ids.reserve(params.size());
    for (Tensor* p : params) ids.push_back(t.leaf(*p, true));
    if (param_nodes != nullptr) *param_nodes = ids;

    NodeId w = ids[0];   // 3x4 matrix
    NodeId x = ids[1];   // vector(4)
    NodeId b = ids[2];   // vector(3)
    NodeId tmp = t.add(t.matvec(w, x), b);
    NodeId act;
    switch (variant % 3) {
        case 0: act = t.sigmoid(tmp); break;
        case 1: act = t.tanh(tmp); break;
        default: act = t.softmax(tmp); break;
    }
    NodeId cos = t.cosine(act, t.add_const(t.scale(b, 0.5), 0.3));
    NodeId picked = t.pick(act, variant % 3);
    NodeId lg = t.log(t.add_const(picked, 1.5));
    std::vector<NodeId> parts = {cos, lg, t.dot(x, x)};
    NodeId stacked = t.stack(parts);
    NodeId obj = t.dot(stacked, stacked);
    return t.value_scalar(obj);
}

NodeId build_objective_node(Tape& t, std::span<Tensor* const> params, int variant,
                            std::vector<NodeId>& param_nodes) {
    std::vector<NodeId> ids;
    for (Tensor* p : params) ids.push_back(t.leaf(*p, true));
    param_nodes = ids;
    NodeId w = ids[0];
    NodeId x = ids[1];
    NodeId b = ids[2];
    NodeId tmp = t.add(t.matvec(w, x), b);
    NodeId act;
    switch (variant % 3) {
        case 0: act = t.sigmoid(tmp); break;
        case 1: act = t.tanh(tmp); break;
        default: act = t.softmax(tmp); break;
    }
    NodeId cos = t.cosine(act, t.add_const(t.scale(b, 0.5), 0.3));
    NodeId picked = t.pick(act, variant % 3);
    NodeId lg = t.log(t.add_const(picked, 1.5));
    std::vector<NodeId> parts = {cos, lg, t.dot(x, x)};
    NodeId stacked = t.stack(parts);
    return t.dot(stacked, stacked);
}

}  // namespace

TEST_CASE("backward matches central finite differences on random graphs") {
    Rng rng(4242);
    for (int variant = 0; variant < 9; ++variant) {
        Tensor w = random_tensor(rng, {3, 4}, 0.7);
        Tensor x = random_tensor(rng, {4}, 0.7);
        Tensor b = random_tensor(rng, {3}, 0.7);
        std::vector<Tensor*> params = {&w, &x, &b};
        std::span<Tensor* const> pspan(params.data(), params.size());

        Tape t;
        std::vector<NodeId> ids;
        NodeId obj = build_objective_node(t, pspan, variant, ids);
        t.backward(obj);

        auto fd = finite_difference_gradient(
            [&]() {
                Tape t2;
                return build_objective(t2, pspan, variant);
            },
            pspan, 1e-5);

        for (std::size_t k = 0; k < params.size(); ++k) {
            Tensor analytic = t.grad_tensor(ids[k]);
            for (std::int64_t i = 0; i < analytic.size(); ++i) {
                const double a = analytic[static_cast<std::size_t>(i)];
                const double f = fd[k][static_cast<std::size_t>(i)];
                const double rel = std::abs(a - f) / std::max({std::abs(a), std::abs(f), 1e-4});
                CHECK(rel <= 1e-5);
            }
        }
    }
}

TEST_CASE("adam") {
    SUBCASE("first step moves by roughly lr in the gradient direction") {
        Tensor p = Tensor::scalar(0.0);
        Tensor g = Tensor::scalar(2.0);
        std::vector<Tensor*> params = {&p};
        std::vector<const Tensor*> cparams = {&p};
        AdamState st = make_adam_state(std::span<const Tensor* const>(cparams.data(), 1));
        adam_step(std::span<Tensor* const>(params.data(), 1), std::span<const Tensor>(&g, 1), st, 1e-3);
        CHECK(p.as_scalar() == doctest::Approx(-1e-3).epsilon(1e-4));
        CHECK(st.t == 1);
    }
    SUBCASE("zero gradient leaves parameters unchanged") {
        Tensor p = Tensor::from_vector({1.5, -2.5});
        Tensor g = Tensor::zeros({2});
        std::vector<Tensor*> params = {&p};
        std::vector<const Tensor*> cparams = {&p};
        AdamState st = make_adam_state(std::span<const Tensor* const>(cparams.data(), 1));
        adam_step(std::span<Tensor* const>(params.data(), 1), std::span<const Tensor>(&g, 1), st, 1e-3);
        CHECK(p[0] == 1.5);
        CHECK(p[1] == -2.5);
    }
    SUBCASE("ten steps on (p-5)^2 shrink the distance; matches a hand-run recurrence") {
        Tensor p = Tensor::scalar(0.0);
        std::vector<Tensor*> params = {&p};
        std::vector<const Tensor*> cparams = {&p};
        AdamState st = make_adam_state(std::span<const Tensor* const>(cparams.data(), 1));

        // independent scalar recurrence
        double q = 0.0, m = 0.0, v = 0.0;
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 0.5;
        for (int t = 1; t <= 10; ++t) {
            const double grad = 2.0 * (p.as_scalar() - 5.0);
            Tensor g = Tensor::scalar(grad);
            adam_step(std::span<Tensor* const>(params.data(), 1), std::span<const Tensor>(&g, 1), st, lr);

            const double gq = 2.0 * (q - 5.0);
            m = b1 * m + (1 - b1) * gq;
            v = b2 * v + (1 - b2) * gq * gq;
            const double mhat = m / (1 - std::pow(b1, t));
            const double vhat = v / (1 - std::pow(b2, t));
            q -= lr * mhat / (std::sqrt(vhat) + eps);
            CHECK(p.as_scalar() == doctest::Approx(q).epsilon(1e-12));
        }
        CHECK(std::abs(p.as_scalar() - 5.0) < 5.0);
    }
    SUBCASE("determinism: identical inputs give bit-identical outputs") {
        auto run = [&]() {
            Tensor p = Tensor::from_vector({0.1, 0.2, 0.3});
            std::vector<Tensor*> params = {&p};
            std::vector<const Tensor*> cparams = {&p};
            AdamState st = make_adam_state(std::span<const Tensor* const>(cparams.data(), 1));
            Tensor g = Tensor::from_vector({0.5, -1.0, 2.0});
            for (int i = 0; i < 7; ++i) {
                adam_step(std::span<Tensor* const>(params.data(), 1), std::span<const Tensor>(&g, 1), st, 1e-2);
            }
            return p;
        };
        CHECK(run().bit_equal(run()));
    }
    SUBCASE("shape mismatch is rejected") {
        Tensor p = Tensor::from_vector({1.0, 2.0});
        Tensor g = Tensor::from_vector({1.0, 2.0, 3.0});
        std::vector<Tensor*> params = {&p};
        std::vector<const Tensor*> cparams = {&p};
        AdamState st = make_adam_state(std::span<const Tensor* const>(cparams.data(), 1));
        CHECK_THROWS_AS(adam_step(std::span<Tensor* const>(params.data(), 1),
                                  std::span<const Tensor>(&g, 1), st, 1e-3),
                        std::invalid_argument);
    }
}
