#include "support.hpp"
#include "vccnet/graph.hpp"

#include <doctest.h>

#include <set>

using namespace vccnet;
using testutil::random_matrix;

namespace {

DistanceMatrix<double> as_distance(const oracle::Mat& m, DistanceSpace space = DistanceSpace::feature) {
    DenseMatrix<double> v(m.size(), m.size());
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m.size(); ++j) v(i, j) = m[i][j];
    return {v, space};
}

double visual_sum(const std::vector<int>& nbrs, const DistanceMatrix<double>& da, int i) {
    double s = 0.0;
    for (int j : nbrs) s += da.values(i, j);
    return s;
}

}  // namespace

TEST_CASE("pairwise feature distance: examples") {
    const Eigen::MatrixXd one = Eigen::MatrixXd::Constant(1, 3, 2.0);
    const auto d1 = pairwise_feature_distance(one);
    CHECK(d1.values.rows() == 1);
    CHECK(d1.values(0, 0) == 0.0);

    Eigen::MatrixXd two(2, 2);
    two << 0, 0, 3, 4;
    const auto d2 = pairwise_feature_distance(two);
    CHECK(d2.values(0, 1) == doctest::Approx(5.0));
    CHECK(d2.values(1, 0) == doctest::Approx(5.0));
    CHECK(d2.space == DistanceSpace::feature);
}

TEST_CASE("pairwise feature distance matches the double loop, is a metric and permutes consistently") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 10);
        const int c = 1 + static_cast<int>(rng() % 5);
        const auto x = random_matrix(rng, n, c);
        const auto d = pairwise_feature_distance(x);
        const auto ref = oracle::pairwise(oracle::from_eigen(x));
        REQUIRE(oracle::max_abs_diff(ref, d.values) < 1e-12);
        for (int i = 0; i < n; ++i) {
            CHECK(d.values(i, i) == 0.0);
            for (int j = 0; j < n; ++j) {
                CHECK(d.values(i, j) == d.values(j, i));
                for (int k = 0; k < n; ++k) CHECK(d.values(i, k) <= d.values(i, j) + d.values(j, k) + 1e-12);
            }
        }
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Eigen::MatrixXd xp(n, c);
        for (int i = 0; i < n; ++i) xp.row(i) = x.row(perm[i]);
        const auto dp = pairwise_feature_distance(xp);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) CHECK(std::abs(dp.values(i, j) - d.values(perm[i], perm[j])) < 1e-12);
    }
}

TEST_CASE("pairwise feature distance works for float scalars") {
    Eigen::MatrixXf x(2, 2);
    x << 0.f, 0.f, 3.f, 4.f;
    const auto d = pairwise_feature_distance(x);
    static_assert(std::is_same_v<decltype(d.values)::Scalar, float>);
    CHECK(d.values(0, 1) == doctest::Approx(5.0f));
}

TEST_CASE("pairwise attention distance") {
    const Eigen::VectorXd constant = Eigen::VectorXd::Constant(4, 0.3);
    CHECK(pairwise_attention_distance(constant).values.isZero(0.0));
    Eigen::Vector2d a(0.0, 1.0);
    const auto d = pairwise_attention_distance(a);
    CHECK(d.values(0, 1) == 1.0);
    CHECK(d.values(1, 0) == 1.0);
    CHECK(d.space == DistanceSpace::visual);

    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 10);
        const Eigen::VectorXd v = random_matrix(rng, n, 1, 0.0, 1.0).col(0);
        const auto ref = oracle::attention_pairwise(std::vector<double>(v.data(), v.data() + n));
        REQUIRE(oracle::max_abs_diff(ref, pairwise_attention_distance(v).values) < 1e-12);
    }
}

TEST_CASE("minmax normalisation") {
    DistanceMatrix<double> d{DenseMatrix<double>(2, 2), DistanceSpace::feature};
    d.values << 0, 5, 5, 0;
    const auto n = minmax_normalize(d);
    CHECK(n.values(0, 1) == 1.0);
    CHECK(n.values(0, 0) == 0.0);
    d.values.setConstant(3.0);
    CHECK(minmax_normalize(d).values.isZero(0.0));

    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const int n_nodes = 1 + static_cast<int>(rng() % 10);
        Matrix m = random_matrix(rng, n_nodes, n_nodes, 0.0, 4.0);
        m = (m + m.transpose()).eval();
        const auto out = minmax_normalize(DistanceMatrix<double>{m, DistanceSpace::fused});
        REQUIRE(oracle::max_abs_diff(oracle::minmax(oracle::from_eigen(m)), out.values) < 1e-12);
        CHECK(out.values.minCoeff() >= 0.0);
        CHECK(out.values.maxCoeff() <= 1.0);
        CHECK(out.space == DistanceSpace::fused);
    }
}

TEST_CASE("fusion") {
    DistanceMatrix<double> df{DenseMatrix<double>(2, 2), DistanceSpace::feature};
    DistanceMatrix<double> da{DenseMatrix<double>(2, 2), DistanceSpace::visual};
    df.values << 0, 0.2, 0.2, 0;
    da.values << 0, 0.5, 0.5, 0;
    const auto f = fuse_distances(df, da, 2.0);
    CHECK(f.values(0, 1) == doctest::Approx(1.2));
    CHECK(f.values(0, 0) == 0.0);
    CHECK(f.space == DistanceSpace::fused);
    CHECK(fuse_distances(df, da, 0.0).values == df.values);

    DistanceMatrix<double> wrong{DenseMatrix<double>::Zero(3, 3), DistanceSpace::visual};
    CHECK_THROWS_AS(fuse_distances(df, wrong, 1.0), Error);
    try {
        fuse_distances(df, wrong, 1.0);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ShapeMismatch);
    }

    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 10);
        const auto a = random_matrix(rng, n, n, 0.0, 1.0);
        const auto b = random_matrix(rng, n, n, 0.0, 1.0);
        const auto out = fuse_distances(DistanceMatrix<double>{a, DistanceSpace::feature},
                                         DistanceMatrix<double>{b, DistanceSpace::visual}, 0.5);
        REQUIRE(oracle::max_abs_diff(oracle::fuse(oracle::from_eigen(a), oracle::from_eigen(b), 0.5), out.values) <
                1e-12);
    }
}

TEST_CASE("knn edges: examples and tie rule") {
    const auto d = as_distance({{0, 1, 2}, {1, 0, 1}, {2, 1, 0}});
    const auto e = knn_edges(d, 1);
    CHECK(e[0] == std::vector<int>{1});
    CHECK(e[1] == std::vector<int>{0});
    CHECK(e[2] == std::vector<int>{1});

    const auto full = knn_edges(d, 2);
    for (int i = 0; i < 3; ++i) {
        std::set<int> s(full[i].begin(), full[i].end());
        CHECK(s.size() == 2);
        CHECK(!s.contains(i));
    }

    const auto equal = as_distance(oracle::Mat(5, std::vector<double>(5, 1.0)));
    const auto eq = knn_edges(equal, 2);
    CHECK(eq[0] == std::vector<int>{1, 2});
    CHECK(eq[1] == std::vector<int>{0, 2});
    CHECK(eq[4] == std::vector<int>{0, 1});
}

TEST_CASE("knn edges reject k outside [1, N-1]") {
    const auto d = as_distance({{0, 1}, {1, 0}});
    for (int k : {0, 2, -1}) {
        try {
            knn_edges(d, k);
            FAIL("expected KTooLarge");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::KTooLarge);
        }
    }
    CHECK(effective_k(9, 4) == 3);
    CHECK(effective_k(9, 1) == 0);
    CHECK(effective_k(2, 16) == 2);
}

TEST_CASE("knn edges match the full-sort oracle, including quantised ties") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 9);
        const int k = 1 + static_cast<int>(rng() % (n - 1));
        Matrix m = random_matrix(rng, n, n, 0.0, 1.0);
        if (trial % 2 == 0) m = (m * 4.0).array().round().matrix() / 4.0;  // many ties
        const auto d = DistanceMatrix<double>{m, DistanceSpace::fused};
        const auto got = knn_edges(d, k);
        const auto want = oracle::knn(oracle::from_eigen(m), k);
        for (int i = 0; i < n; ++i) {
            REQUIRE(static_cast<int>(got[i].size()) == k);
            REQUIRE(got[i] == want[i]);
        }
    }
}

TEST_CASE("alignment loss is the mean squared difference and symmetric") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 10);
        const auto a = random_matrix(rng, n, n, 0.0, 1.0);
        const auto b = random_matrix(rng, n, n, 0.0, 1.0);
        double ref = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) ref += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
        ref /= n * n;
        const DistanceMatrix<double> da{a, DistanceSpace::feature}, db{b, DistanceSpace::visual};
        CHECK(alignment_loss(da, db) == doctest::Approx(ref).epsilon(1e-12));
        CHECK(alignment_loss(da, db) == alignment_loss(db, da));
        CHECK(alignment_loss(da, da) == 0.0);
    }
}

TEST_CASE("raising alpha never increases the visual distance of a neighbour set") {
    std::mt19937_64 rng(7);
    const std::vector<double> alphas{0.0, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0};
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 6 + static_cast<int>(rng() % 10);
        const int k = 1 + static_cast<int>(rng() % 5);
        const auto x = random_matrix(rng, n, 4);
        const Eigen::VectorXd a = random_matrix(rng, n, 1, 0.0, 1.0).col(0);
        const auto df = minmax_normalize(pairwise_feature_distance(x));
        const auto da = normalized_attention_distance(a);
        for (int i = 0; i < n; ++i) {
            double previous = INFINITY;
            for (double alpha : alphas) {
                const auto e = knn_edges(fuse_distances(df, da, alpha), k);
                const double s = visual_sum(e[i], da, i);
                CHECK(s <= previous + 1e-12);
                previous = s;
            }
        }
    }
}

TEST_CASE("normalised attention distance is single precision and scale free") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 15);
        const Eigen::VectorXd a = random_matrix(rng, n, 1, 0.0, 1.0).col(0);
        const auto d = normalized_attention_distance(a);
        for (Eigen::Index i = 0; i < d.values.size(); ++i) {
            const double v = d.values.data()[i];
            CHECK(static_cast<double>(static_cast<float>(v)) == v);
        }
        const double scale = std::ldexp(1.0, static_cast<int>(rng() % 20) - 10);
        CHECK(normalized_attention_distance(Eigen::VectorXd(a * scale)).values == d.values);
    }
}
