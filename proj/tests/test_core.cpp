#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cipred/core/csv.hpp"
#include "cipred/core/errors.hpp"
#include "cipred/core/linalg.hpp"
#include "cipred/core/rng.hpp"
#include "cipred/core/sha256.hpp"
#include "cipred/core/threading.hpp"

using namespace cipred;

TEST_CASE("rng streams are deterministic and distinct") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    bool all_equal = true;
    Rng a2(42);
    for (int i = 0; i < 10; ++i) all_equal = all_equal && (a2.next_u64() == c.next_u64());
    CHECK_FALSE(all_equal);
    CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 2, 4));
}

TEST_CASE("normal draws have about the right first two moments") {
    Rng rng(7);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::fabs(mean) < 0.01);
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("csv parse and formatting round trip") {
    const auto t = csv::parse("a,b,c\n1,2.5,x\r\n3,-0.125,y\n");
    CHECK(t.header.size() == 3);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[1][1] == "-0.125");
    CHECK(csv::parse_double("2.5", "ctx") == 2.5);
    CHECK_THROWS_AS(csv::parse_double("2,5", "ctx"), FormatError);
    CHECK_THROWS_AS(csv::parse_double("", "ctx"), FormatError);

    for (double v : {0.1, 1.0 / 3.0, 1e-17, -123456.789, 0.0}) {
        const std::string s = csv::format_double(v);
        CHECK(csv::parse_double(s, "roundtrip") == v);
    }
}

TEST_CASE("sha256 matches known vectors") {
    CHECK(Sha256::of_bytes("", 0) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    const std::string abc = "abc";
    CHECK(Sha256::of_bytes(abc.data(), abc.size()) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    // Multi-block input (> 64 bytes).
    const std::string msg = "abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq";
    CHECK(Sha256::of_bytes(msg.data(), msg.size()) ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("cholesky and lu solve recover known solutions") {
    linalg::Mat a(3, 3);
    a(0, 0) = 4; a(0, 1) = 1; a(0, 2) = 0;
    a(1, 0) = 1; a(1, 1) = 3; a(1, 2) = 1;
    a(2, 0) = 0; a(2, 1) = 1; a(2, 2) = 5;
    linalg::Mat x_true(3, 1);
    x_true(0, 0) = 1; x_true(1, 0) = -2; x_true(2, 0) = 0.5;
    const linalg::Mat b = linalg::matmul(a, x_true);
    const linalg::Mat x1 = linalg::cholesky_solve(a, b);
    const linalg::Mat x2 = linalg::lu_solve(a, b);
    for (int i = 0; i < 3; ++i) {
        CHECK(x1(i, 0) == doctest::Approx(x_true(i, 0)).epsilon(1e-12));
        CHECK(x2(i, 0) == doctest::Approx(x_true(i, 0)).epsilon(1e-12));
    }
    CHECK(linalg::cholesky_logdet(a) ==
          doctest::Approx(std::log(4 * (3 * 5 - 1) - 1 * 5)).epsilon(1e-12));

    linalg::Mat not_pd(2, 2);
    not_pd(0, 0) = 1; not_pd(0, 1) = 2;
    not_pd(1, 0) = 2; not_pd(1, 1) = 1;
    CHECK_THROWS_AS(linalg::cholesky(not_pd), ValidationError);
}

TEST_CASE("jacobi eigendecomposition reproduces a known spectrum") {
    // Symmetric matrix with eigenvalues 6, 3, 1 (constructed from a rotation).
    Rng rng(11);
    linalg::Mat q(3, 3);
    for (auto& v : q.a) v = rng.normal();
    linalg::mgs_orthonormalize(q);
    const double lam[3] = {6, 3, 1};
    linalg::Mat a(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) a(i, j) += q(i, k) * lam[k] * q(j, k);
    const auto eig = linalg::jacobi_eigh(a);
    CHECK(eig.values[0] == doctest::Approx(6).epsilon(1e-10));
    CHECK(eig.values[1] == doctest::Approx(3).epsilon(1e-10));
    CHECK(eig.values[2] == doctest::Approx(1).epsilon(1e-10));
    // Orthonormal eigenvectors.
    for (int c1 = 0; c1 < 3; ++c1)
        for (int c2 = 0; c2 < 3; ++c2) {
            double dot = 0;
            for (int i = 0; i < 3; ++i) dot += eig.vectors(i, c1) * eig.vectors(i, c2);
            CHECK(dot == doctest::Approx(c1 == c2 ? 1.0 : 0.0).epsilon(1e-10));
        }
}

TEST_CASE("parallel_for covers the range exactly once and propagates errors") {
    std::vector<int> hits(1000, 0);
    parallel_for(1000, 4, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) hits[static_cast<std::size_t>(i)] += 1;
    });
    for (int h : hits) CHECK(h == 1);
    CHECK_THROWS_AS(parallel_for(10, 3,
                                 [&](std::int64_t, std::int64_t) {
                                     throw ValidationError("boom");
                                 }),
                    ValidationError);
}
