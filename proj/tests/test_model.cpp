#include <catch_amalgamated.hpp>

#include <cmath>

#include <Eigen/SVD>

#include "dip/model.hpp"
#include "dip/rng.hpp"

using dip::DipNetwork;
using dip::init_network;
using dip::make_activation;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// central finite differences of forward() in every W entry
MatrixXd fd_jacobian(const DipNetwork& net, double h = 1e-5) {
    DipNetwork work = net;
    const Eigen::Index k = net.k(), d = net.d(), n = net.n();
    MatrixXd jac(n, k * d);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < d; ++j) {
            work.W = net.W;
            work.W(i, j) = net.W(i, j) + h;
            const VectorXd up = dip::forward(work);
            work.W(i, j) = net.W(i, j) - h;
            const VectorXd down = dip::forward(work);
            jac.col(i * d + j) = (up - down) / (2.0 * h);
        }
    return jac;
}

DipNetwork random_net(Eigen::Index k, Eigen::Index d, Eigen::Index n, const std::string& act,
                      std::uint64_t seed) {
    return init_network(k, d, n, make_activation(act), seed);
}

}  // namespace

TEST_CASE("init_network is deterministic and validates dimensions", "[model]") {
    const auto a = random_net(2, 2, 1, "sigmoid", 99);
    const auto b = random_net(2, 2, 1, "sigmoid", 99);
    CHECK(a.u == b.u);
    CHECK(a.W == b.W);
    CHECK(a.V == b.V);
    const auto c = random_net(2, 2, 1, "sigmoid", 100);
    CHECK(a.W != c.W);
    CHECK_THROWS_AS(init_network(0, 2, 1, make_activation("sigmoid"), 1), dip::ConfigError);
    CHECK_THROWS_AS(init_network(2, 0, 1, make_activation("sigmoid"), 1), dip::ConfigError);
    CHECK_THROWS_AS(init_network(2, 2, 0, make_activation("sigmoid"), 1), dip::ConfigError);
}

TEST_CASE("input lives on the unit sphere", "[model]") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto net = random_net(3, 17, 2, "tanh", seed);
        CHECK(std::abs(net.u.norm() - 1.0) <= 1e-12);
    }
}

TEST_CASE("second layer entries respect the bound D", "[model]") {
    const auto rad = random_net(50, 3, 4, "sigmoid", 5);
    CHECK(rad.D == 1.0);
    CHECK(rad.V.cwiseAbs().maxCoeff() <= 1.0);
    CHECK((rad.V.cwiseAbs().array() == 1.0).all());

    const auto uni = init_network(50, 3, 4, make_activation("sigmoid"), 5, dip::VDist::uniform);
    CHECK(uni.D == std::sqrt(3.0));
    CHECK(uni.V.cwiseAbs().maxCoeff() <= std::sqrt(3.0));
}

TEST_CASE("empirical column covariance of V approaches identity", "[model]") {
    // law of large numbers at k = 1e5, n = 4, ten seeds
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto net = random_net(100000, 2, 4, "linear", seed);
        const MatrixXd cov = net.V * net.V.transpose() / static_cast<double>(net.k());
        CHECK((cov - MatrixXd::Identity(4, 4)).norm() < 0.05);
    }
    // statistical bound 5 sqrt(n/k) at k = 1e4
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto net = random_net(10000, 2, 8, "linear", 100 + seed);
        const MatrixXd cov = net.V * net.V.transpose() / static_cast<double>(net.k());
        const MatrixXd dev_matrix = cov - MatrixXd::Identity(8, 8);
        const double dev = dev_matrix.selfadjointView<Eigen::Lower>().operatorNorm();
        CHECK(dev <= 5.0 * std::sqrt(8.0 / 10000.0));
    }
}

TEST_CASE("forward matches closed forms", "[model]") {
    // k = 1, V = [1], W = 0: phi(0) = 1/2 under sigmoid
    auto net = random_net(1, 3, 1, "sigmoid", 1);
    net.V(0, 0) = 1.0;
    net.W.setZero();
    CHECK_THAT(dip::forward(net)(0), Catch::Matchers::WithinAbs(0.5, 1e-15));

    // linear activation: forward = V W u / sqrt(k)
    const auto lin = random_net(5, 4, 3, "linear", 2);
    const VectorXd direct = lin.V * (lin.W * lin.u) / std::sqrt(5.0);
    CHECK((dip::forward(lin) - direct).norm() <= 1e-14 * direct.norm());

    // k=2, d=1, n=1 sigmoid closed form
    DipNetwork two;
    two.activation = make_activation("sigmoid");
    two.u = VectorXd::Ones(1);
    two.W = (Eigen::MatrixXd(2, 1) << 0.3, -1.2).finished();
    two.V = (Eigen::MatrixXd(1, 2) << 0.7, -0.4).finished();
    two.D = 0.7;
    const double expected =
        (0.7 * two.activation.value(0.3) - 0.4 * two.activation.value(-1.2)) / std::sqrt(2.0);
    CHECK_THAT(dip::forward(two)(0), Catch::Matchers::WithinAbs(expected, 1e-15));
}

TEST_CASE("forward is 1-homogeneous in V", "[model]") {
    auto net = random_net(7, 3, 4, "softplus", 11);
    const VectorXd once = dip::forward(net);
    net.V *= 2.0;
    CHECK((dip::forward(net) - 2.0 * once).norm() <= 1e-13 * once.norm());
}

TEST_CASE("jacobian closed forms", "[model]") {
    // k=1, d=2, n=1, u=(1,0), W=0, V=[2], sigmoid: J = (0.5, 0)
    DipNetwork net;
    net.activation = make_activation("sigmoid");
    net.u = (Eigen::VectorXd(2) << 1.0, 0.0).finished();
    net.W = MatrixXd::Zero(1, 2);
    net.V = MatrixXd::Constant(1, 1, 2.0);
    net.D = 2.0;
    const MatrixXd jac = dip::jacobian(net);
    REQUIRE(jac.rows() == 1);
    REQUIRE(jac.cols() == 2);
    CHECK_THAT(jac(0, 0), Catch::Matchers::WithinAbs(0.5, 1e-15));
    CHECK_THAT(jac(0, 1), Catch::Matchers::WithinAbs(0.0, 1e-15));

    // linear activation: block i is V_i u^T / sqrt(k) exactly
    const auto lin = random_net(4, 3, 2, "linear", 3);
    const MatrixXd jlin = dip::jacobian(lin);
    for (Eigen::Index i = 0; i < 4; ++i) {
        const MatrixXd block = lin.V.col(i) * lin.u.transpose() / 2.0;
        CHECK((jlin.middleCols(i * 3, 3) - block).norm() == 0.0);
    }
}

TEST_CASE("jacobian matches finite differences", "[model]") {
    for (const std::string& act : dip::supported_activations()) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            dip::Rng dims(dip::derive_seed(seed, {77}));
            const auto k = 1 + static_cast<Eigen::Index>(dims.next_u64() % 5);
            const auto d = 1 + static_cast<Eigen::Index>(dims.next_u64() % 6);
            const auto n = 1 + static_cast<Eigen::Index>(dims.next_u64() % 4);
            const auto net = random_net(k, d, n, act, seed);
            const MatrixXd analytic = dip::jacobian(net);
            const MatrixXd fd = fd_jacobian(net);
            CAPTURE(act, k, d, n, seed);
            REQUIRE((analytic - fd).norm() <= 1e-6 * fd.norm());
        }
    }
}

TEST_CASE("gram matrix equals J J^T", "[model]") {
    // hand example: k=1, d=2, n=1, V=[2], sigmoid at W=0 gives H = 0.25
    DipNetwork net;
    net.activation = make_activation("sigmoid");
    net.u = (Eigen::VectorXd(2) << 1.0, 0.0).finished();
    net.W = MatrixXd::Zero(1, 2);
    net.V = MatrixXd::Constant(1, 1, 2.0);
    net.D = 2.0;
    CHECK_THAT(dip::jacobian_gram(net)(0, 0), Catch::Matchers::WithinAbs(0.25, 1e-15));
    CHECK_THAT(dip::sigma_min_jacobian(net), Catch::Matchers::WithinAbs(0.5, 1e-15));

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto rnd = random_net(4, 3, 3, seed % 2 ? "sigmoid" : "tanh", seed);
        const MatrixXd gram = dip::jacobian_gram(rnd);
        const MatrixXd jjt = dip::jacobian(rnd) * dip::jacobian(rnd).transpose();
        REQUIRE((gram - jjt).norm() <= 1e-10 * gram.norm());
    }
}

TEST_CASE("sigma_min agrees with an SVD of the explicit jacobian", "[model]") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto net = random_net(3, 4, 2, "sigmoid", seed);
        Eigen::JacobiSVD<MatrixXd> svd(dip::jacobian(net));
        const double oracle = svd.singularValues().tail(1)(0);
        CHECK(std::abs(dip::sigma_min_jacobian(net) - oracle) <= 1e-10);
    }

    // scaled-orthogonal V with linear activation has sigma_min exactly 1
    DipNetwork iso;
    iso.activation = make_activation("linear");
    iso.u = (Eigen::VectorXd(2) << std::sqrt(0.5), -std::sqrt(0.5)).finished();
    iso.W = MatrixXd::Zero(2, 2);
    iso.V = std::sqrt(2.0) * MatrixXd::Identity(2, 2);
    iso.D = std::sqrt(2.0);
    CHECK_THAT(dip::sigma_min_jacobian(iso), Catch::Matchers::WithinAbs(1.0, 1e-12));
    Eigen::JacobiSVD<MatrixXd> svd(dip::jacobian(iso));
    CHECK_THAT(svd.singularValues().tail(1)(0), Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("gram eigenvalue concentrates above the Chernoff threshold", "[model][slow]") {
    // k = 1e4, n = 8: lambda_min(H) >= C_phi_prime^2 / 4 in at least 95/100 inits
    const auto act = make_activation("sigmoid");
    const double threshold = act.C_phi_prime * act.C_phi_prime / 4.0;
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto net = init_network(10000, 6, 8, act, dip::derive_seed(9000, {seed}));
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(dip::jacobian_gram(net),
                                                   Eigen::EigenvaluesOnly);
        hits += es.eigenvalues()(0) >= threshold;
    }
    CHECK(hits >= 95);
}

TEST_CASE("jacobian difference norm stays within the Lipschitz bound", "[model]") {
    const auto act = make_activation("sigmoid");
    const double bound = act.B * 1.0 * std::sqrt(5.0 / 50.0);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto net = init_network(50, 10, 5, act, dip::derive_seed(31, {seed}));
        dip::Rng rng(dip::derive_seed(32, {seed}));
        const MatrixXd other = dip::normal_matrix(rng, 50, 10);
        const double lhs = dip::jacobian_diff_opnorm(net, other);
        const double rhs = bound * (net.W - other).norm();
        REQUIRE(lhs <= rhs + 1e-10);

        // cross-check the Gram shortcut against explicit jacobians
        if (seed < 5) {
            DipNetwork moved = net;
            moved.W = other;
            const MatrixXd diff = dip::jacobian(net) - dip::jacobian(moved);
            Eigen::JacobiSVD<MatrixXd> svd(diff);
            CHECK(std::abs(lhs - svd.singularValues()(0)) <= 1e-10);
        }
    }
}
