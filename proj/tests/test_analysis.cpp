#include <cmath>

#include "doctest.h"
#include "vasso/analysis.hpp"
#include "vasso/csv.hpp"
#include "vasso/dataset.hpp"
#include "vasso/mlp.hpp"
#include "vasso/optimizers.hpp"
#include "vasso/quadratic.hpp"

using namespace vasso;

namespace {

ParamVector vec(std::initializer_list<double> v) {
    ParamVector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

}  // namespace

TEST_CASE("track_drift") {
    const std::vector<ParamVector> same(5, vec({0.3, 0.4}));
    const auto flat = track_drift(same, 0.5);
    CHECK(flat.drifts.size() == 4);
    CHECK(flat.max() == 0.0);

    std::vector<ParamVector> flip;
    for (int i = 0; i < 6; ++i) flip.push_back(vec({i % 2 ? -0.5 : 0.5, 0.0}));
    const auto anti = track_drift(flip, 0.5);
    for (double d : anti.drifts) CHECK(d == 1.0);
    CHECK(anti.mean() == 1.0);
}

TEST_CASE("ema oracle") {
    CHECK(ema_steady_state_mse(0.2, 1.0) == doctest::Approx(1.0 / 9.0));
    CHECK(ema_steady_state_mse(1.0, 2.0) == 2.0);
}

TEST_CASE("mse_suppression special cases") {
    auto q = diagonal_quadratic(vec({1, 2, 3}), 0.5, 2);
    const ParamVector x = vec({1, 0, -1});
    Rng r1(1, 1);
    const auto m1 = mse_suppression(*q, x, 1.0, 2000, r1);
    CHECK(m1.mse_d == doctest::Approx(m1.mse_g).epsilon(1e-12));

    auto clean = diagonal_quadratic(vec({1, 2, 3}), 0.0, 2);
    Rng r2(1, 1);
    const auto m0 = mse_suppression(*clean, x, 0.3, 500, r2);
    CHECK(m0.mse_d < 1e-28);  // EMA rounding only
    CHECK(m0.mse_g == 0.0);
}

TEST_CASE("mse_suppression matches the EMA oracle at theta = 0.2") {
    // sigma^2 = dim * s^2 = 1
    auto q = diagonal_quadratic(vec({1, 2, 3, 4}), 0.5, 3);
    Rng rng(2, 2);
    const auto m = mse_suppression(*q, vec({0.5, -1, 2, 0}), 0.2, 100000, rng);
    CHECK(m.mse_d == doctest::Approx(1.0 / 9.0).epsilon(0.10));
    CHECK(m.mse_g == doctest::Approx(1.0).epsilon(0.05));
    CHECK(m.mse_d < 0.2);
}

TEST_CASE("delta_stability") {
    auto q = diagonal_quadratic(vec({1, 2, 3, 4}), 0.5, 4);
    const ParamVector x = vec({1, 1, -1, 0.5});
    Rng rng(1, 1);
    const ParamVector gf = q->full_grad(x);
    const SlopeSampler exact = [&](Rng&) { return gf; };
    const auto d0 = delta_stability(*q, x, exact, 0.05, 100, rng);
    CHECK(d0.delta == 0.0);

    const auto sam = delta_stability(*q, x, sam_slope_sampler(*q, x, 1, 7), 0.05, 20000, rng);
    const auto vas = delta_stability(*q, x, vasso_slope_sampler(*q, x, 0.2, 1, 7), 0.05, 20000, rng);
    CHECK(sam.bound_violations == 0);
    CHECK(vas.bound_violations == 0);
    CHECK(vas.delta < sam.delta);
}

TEST_CASE("delta_stability: slope MSE ratio follows the EMA oracle") {
    auto q = diagonal_quadratic(vec({1, 2, 3, 4}), 0.5, 5);
    const ParamVector x = vec({0.2, -0.4, 1, 0});
    const ParamVector gf = q->full_grad(x);
    auto sam = sam_slope_sampler(*q, x, 1, 11);
    auto vas = vasso_slope_sampler(*q, x, 0.2, 1, 11);
    Rng rng(1, 1);
    double eg = 0, ed = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        eg += (sam(rng) - gf).squaredNorm();
        ed += (vas(rng) - gf).squaredNorm();
    }
    CHECK(ed / eg == doctest::Approx(0.2 / 1.8).epsilon(0.15));
}

TEST_CASE("snr helpers") {
    // E|N(0, I_3)| = 2 sqrt(2 / pi)
    CHECK(expected_gaussian_norm(1.0, 3) == doctest::Approx(2.0 * std::sqrt(2.0 / M_PI)));
    // E|N(0, I_2)| = sqrt(pi / 2)
    CHECK(expected_gaussian_norm(2.0, 2) == doctest::Approx(2.0 * std::sqrt(M_PI / 2.0)));
    const ParamVector g = vec({0.2, -0.1, 0.6});
    CHECK(snr_of_scale(g, scale_for_snr(g, 0.37)) == doctest::Approx(0.37));
    CHECK(expected_gaussian_norm(1.0, 500) == doctest::Approx(std::sqrt(499.5)).epsilon(1e-4));
}

TEST_CASE("snr spread") {
    const ParamVector g = vec({0.2, -0.1, 0.6});
    Rng rng(1, streams::kNoise);
    const std::vector<double> zero{0.0};
    const auto s0 = snr_adversary_spread(g, zero, 100, 1.0, rng);
    CHECK(s0[0].mean_cos == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(s0[0].std_cos < 1e-7);

    std::vector<double> scales;
    for (double snr : {5.0, 1.0, 0.1, 0.01}) scales.push_back(scale_for_snr(g, snr));
    Rng rng2(2, streams::kNoise);
    const auto s = snr_adversary_spread(g, scales, 10000, 1.0, rng2);
    CHECK(s[0].mean_cos > 0.9);
    CHECK(std::abs(s[3].mean_cos) < 0.1);
    for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i].mean_cos <= s[i - 1].mean_cos);
}

TEST_CASE("lanczos on diagonal quadratics") {
    ParamVector spec(200);
    spec.head(5) << 10, 5, 4, 3, 2;
    for (Eigen::Index i = 5; i < 200; ++i) spec(i) = 1.0 - static_cast<double>(i - 5) / 200.0;
    auto q = diagonal_quadratic(spec, 0.0, 1);
    Rng rng(3, streams::kProbe);
    const auto est = lanczos_spectrum(*q, ParamVector::Zero(200), 5, 60, rng);
    REQUIRE(est.top_eigenvalues.size() == 5);
    CHECK(est.top_eigenvalues[0] == doctest::Approx(10.0).epsilon(1e-6));
    CHECK(est.top_eigenvalues[0] / est.top_eigenvalues[4] == doctest::Approx(5.0).epsilon(1e-4));
    for (std::size_t i = 1; i < 5; ++i) CHECK(est.top_eigenvalues[i] <= est.top_eigenvalues[i - 1]);
    CHECK(est.top_eigenvalues[0] <= 10.0 + 1e-9);

    auto iso = diagonal_quadratic(ParamVector::Constant(30, 2.5), 0.0, 1);
    const auto e2 = lanczos_spectrum(*iso, ParamVector::Zero(30), 3, 10, rng);
    for (double v : e2.top_eigenvalues) CHECK(v == doctest::Approx(2.5));
    CHECK(e2.breakdown);
}

TEST_CASE("lanczos on a trained mlp") {
    BlobSpec spec;
    spec.samples_per_class = 40;
    Rng data_rng(2, streams::kData);
    auto data = std::make_shared<const Dataset>(make_blobs(spec, data_rng));
    auto obj = mlp_objective({2, 6, 2}, Activation::tanh, data);
    Rng init(2, streams::kInit);
    ParamVector x = obj->network().init_parameters(init);
    for (int t = 0; t < 2000; ++t) x -= 0.5 * obj->full_grad(x);
    Rng rng(2, streams::kProbe);
    const auto est = lanczos_spectrum(*obj, x, 3, static_cast<int>(obj->dim()), rng);
    const double l1 = est.top_eigenvalues[0];
    CHECK(std::isfinite(l1));
    CHECK(l1 > 0.0);
    CHECK(est.residuals[0] < 1e-3 * l1);
}

TEST_CASE("landscape slices") {
    auto q = diagonal_quadratic(vec({1, 4, 9}), 0.0, 1);
    const ParamVector center = vec({0.5, -0.2, 0.1});
    const auto alphas = linspace(-1.0, 1.0, 21);
    CHECK(alphas[10] == 0.0);
    const std::vector<ParamVector> axis{vec({0, 2, 0})};
    const auto grid = landscape_slice(*q, center, axis, alphas);
    CHECK(grid.losses(10, 0) == q->full_loss(center));

    // along e_2 the slice is f(c) + 4 c_2 a + 2 a^2; least squares fit of a parabola
    Eigen::MatrixXd V(21, 3);
    Eigen::VectorXd y(21);
    for (int i = 0; i < 21; ++i) {
        V(i, 0) = 1.0;
        V(i, 1) = alphas[i];
        V(i, 2) = alphas[i] * alphas[i];
        y(i) = grid.losses(i, 0);
    }
    const Eigen::VectorXd coef = V.colPivHouseholderQr().solve(y);
    const double ss_res = (V * coef - y).squaredNorm();
    const double ss_tot = (y.array() - y.mean()).square().sum();
    CHECK(1.0 - ss_res / ss_tot > 1.0 - 1e-10);
    CHECK(coef(2) == doctest::Approx(2.0));

    auto iso = diagonal_quadratic(ParamVector::Ones(3), 0.0, 1);
    Rng rng(1, 1);
    const std::vector<ParamVector> dir{rng.normal_vector(3)};
    const auto sym = landscape_slice(*iso, ParamVector::Zero(3), dir, alphas);
    for (int i = 0; i < 21; ++i) CHECK(std::abs(sym.losses(i, 0) - sym.losses(20 - i, 0)) <= 1e-10);

    const std::vector<ParamVector> two{vec({1, 0, 0}), vec({0, 0, 1})};
    const auto betas = linspace(-0.5, 0.5, 3);
    const auto g2 = landscape_slice(*q, center, two, alphas, betas);
    CHECK(g2.losses.rows() == 21);
    CHECK(g2.losses.cols() == 3);
    CHECK(g2.losses(10, 1) == q->full_loss(center));
}

TEST_CASE("per-neuron direction normalisation") {
    BlobSpec spec;
    spec.samples_per_class = 5;
    Rng data_rng(1, streams::kData);
    auto data = std::make_shared<const Dataset>(make_blobs(spec, data_rng));
    auto obj = mlp_objective({2, 3, 2}, Activation::relu, data);
    Rng rng(5, 5);
    const ParamVector center = rng.normal_vector(obj->dim());
    const ParamVector d = normalize_direction(*obj, center, rng.normal_vector(obj->dim()));
    const Mlp& net = obj->network();
    for (std::size_t layer = 0; layer < net.num_layers(); ++layer) {
        for (int n = 0; n < net.layer_sizes()[layer + 1]; ++n) {
            double dn = 0, cn = 0;
            for (auto i : net.neuron_parameters(layer, n)) {
                dn += d(i) * d(i);
                cn += center(i) * center(i);
            }
            CHECK(std::sqrt(dn) == doctest::Approx(std::sqrt(cn)));
        }
    }
    auto q = diagonal_quadratic(vec({1, 2}), 0.0, 1);
    CHECK(normalize_direction(*q, vec({5, 5}), vec({3, 4})).norm() == doctest::Approx(1.0));
}

TEST_CASE("csv writers") {
    StabilityTrace tr;
    tr.drifts = {0.5, 0.25};
    CHECK(drift_csv(tr) == "t,drift\n1,0.5\n2,0.25\n");
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
    CHECK(format_optional(std::nullopt).empty());
    SpectrumEstimate s;
    s.top_eigenvalues = {2.0};
    s.residuals = {1e-9};
    CHECK(spectrum_csv(s) == "index,ritz_value,residual\n1,2,1e-09\n");
}
