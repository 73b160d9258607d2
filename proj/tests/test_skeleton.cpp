#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "noniso/skeleton.hpp"
#include "noniso/verify.hpp"

#include <cmath>
#include <fstream>

using namespace noniso;

namespace {

Skeleton chain(int joints) {
    Skeleton s;
    for (int j = 0; j < joints; ++j) s.joint_names.push_back("j" + std::to_string(j));
    for (int j = 0; j + 1 < joints; ++j) s.edges.emplace_back(j, j + 1);
    s.bone_lengths.assign(joints - 1, 1.0);
    return s;
}

} // namespace

TEST_CASE("adjacency of small chains") {
    const Mat a2 = build_adjacency(chain(2));
    CHECK(a2(0, 0) == 0.0);
    CHECK(a2(0, 1) == 1.0);
    CHECK(a2(1, 0) == 1.0);

    const Mat a3 = build_adjacency(chain(3));
    CHECK(a3(0, 1) == 1.0);
    CHECK(a3(1, 2) == 1.0);
    CHECK(a3(0, 2) == 0.0);
    for (int i = 0; i < 3; ++i) CHECK(a3(i, i) == 0.0);
}

TEST_CASE("adjacency of a star") {
    Skeleton s;
    s.joint_names = {"a", "b", "c", "d"};
    s.edges = {{0, 1}, {1, 2}, {1, 3}};
    s.bone_lengths = {1.0, 1.0, 1.0};
    const Mat a = build_adjacency(s);
    CHECK(a(1, 0) == 1.0);
    CHECK(a(1, 1) == 0.0);
    CHECK(a(1, 2) == 1.0);
    CHECK(a(1, 3) == 1.0);
}

TEST_CASE("skeleton validation errors name the offending edge") {
    Skeleton s = chain(3);
    s.edges.push_back({1, 1});
    s.bone_lengths.push_back(1.0);
    CHECK_THROWS_WITH_AS(build_adjacency(s), doctest::Contains("self-loop"), ValidationError);

    Skeleton oob = chain(3);
    oob.edges[1] = {1, 7};
    CHECK_THROWS_WITH_AS(build_adjacency(oob), doctest::Contains("(1,7)"), ValidationError);

    Skeleton disc = chain(4);
    disc.edges.erase(disc.edges.begin() + 1);
    disc.bone_lengths.pop_back();
    CHECK_THROWS_WITH_AS(build_adjacency(disc), doctest::Contains("disconnected"),
                         ValidationError);

    Skeleton dup = chain(3);
    dup.edges.push_back({1, 0});
    dup.bone_lengths.push_back(1.0);
    CHECK_THROWS_AS(build_adjacency(dup), ValidationError);

    Skeleton neg = chain(3);
    neg.bone_lengths[0] = 0.0;
    CHECK_THROWS_AS(build_adjacency(neg), ValidationError);
}

TEST_CASE("closure matrix hop weighting") {
    const Mat r = closure_matrix(chain(3), 0.5);
    CHECK(r(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r(1, 2) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r(0, 2) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r(0, 0) == 0.0);

    // Two joints: everything one hop, equals adjacency for any eta.
    const Mat r2 = closure_matrix(chain(2), 0.37);
    CHECK(r2(0, 1) == 1.0);

    // eta -> 1 pushes all entries of a 3-chain to 1.
    const Mat r1 = closure_matrix(chain(3), 1.0 - 1e-12);
    CHECK(r1(0, 2) == doctest::Approx(1.0).epsilon(1e-9));

    CHECK_THROWS_AS(closure_matrix(chain(3), 1.0), ValidationError);
    CHECK_THROWS_AS(closure_matrix(chain(3), 0.0), ValidationError);
}

TEST_CASE("masked closure zeroes paths through the hub") {
    const Mat r = masked_closure_matrix(chain(3), 0.5, 1);
    CHECK(r(0, 2) == 0.0);
    CHECK(r(0, 1) == 1.0);
    CHECK(r(1, 2) == 1.0);

    // A leaf hub is interior to no path.
    const Mat leaf = masked_closure_matrix(chain(3), 0.5, 0);
    const Mat full = closure_matrix(chain(3), 0.5);
    CHECK(max_abs_diff(leaf, full) == 0.0);

    // Two joints have no interior vertices at all.
    const Mat two = masked_closure_matrix(chain(2), 0.5, 0);
    CHECK(max_abs_diff(two, build_adjacency(chain(2))) == 0.0);
}

TEST_CASE("correlation model of the 2-chain") {
    const CorrelationModel c = correlation_from_matrix(build_adjacency(chain(2)), NormKind::spectral);
    CHECK(c.sigma_n(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(c.sigma_n(0, 1) == doctest::Approx(0.5).epsilon(1e-14));
    REQUIRE(c.eigvals.size() == 2);
    CHECK(c.eigvals[0] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(c.eigvals[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("correlation model of the 3-chain") {
    const CorrelationModel c = correlation_from_matrix(build_adjacency(chain(3)), NormKind::spectral);
    for (int i = 0; i < 3; ++i) CHECK(c.sigma_n(i, i) == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(c.sigma_n(0, 1) == doctest::Approx(1.0 / (2.0 * std::sqrt(2.0))).epsilon(1e-13));
    CHECK(c.eigvals[0] == doctest::Approx(0.0).epsilon(1e-13));
    CHECK(c.eigvals[1] == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(c.eigvals[2] == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("multiple of identity is degenerate") {
    Mat m = Mat::identity(4);
    for (int i = 0; i < 4; ++i) m(i, i) = 2.5;
    CHECK_THROWS_AS(correlation_from_matrix(m, NormKind::spectral), ValidationError);
}

TEST_CASE("correlation properties over random connected graphs") {
    Rng rng(2024);
    for (int trial = 0; trial < 30; ++trial) {
        const int joints = 2 + static_cast<int>(rng.uniform_index(11)); // 2..12
        const Skeleton skel = random_connected_skeleton(joints, rng);
        const Mat a = build_adjacency(skel);
        for (NormKind kind : {NormKind::spectral, NormKind::frobenius}) {
            const CorrelationModel c = correlation_from_matrix(a, kind);

            // PSD with smallest eigenvalue exactly zero after clamping.
            CHECK(c.eigvals.front() == 0.0);
            for (double v : c.eigvals) CHECK(v >= 0.0);
            CHECK(std::is_sorted(c.eigvals.begin(), c.eigvals.end()));

            if (kind == NormKind::spectral) {
                CHECK(c.eigvals.back() == doctest::Approx(1.0).epsilon(1e-10));
            }

            // Reconstruction and orthogonality.
            const Mat recon = sandwich_diag(c.eigvecs, c.eigvals);
            CHECK(rel_frobenius_error(recon, c.sigma_n) < 1e-10);
            const Mat gram = matmul_tn(c.eigvecs, c.eigvecs);
            CHECK(max_abs_diff(gram, Mat::identity(joints)) < 1e-10);
        }
    }
}

TEST_CASE("uniform diagonal shifts cancel") {
    Rng rng(7);
    const Skeleton skel = random_connected_skeleton(6, rng);
    Mat a = build_adjacency(skel);
    const CorrelationModel base = correlation_from_matrix(a, NormKind::spectral);
    for (int i = 0; i < a.rows; ++i) a(i, i) += 3.25;
    const CorrelationModel shifted = correlation_from_matrix(a, NormKind::spectral);
    CHECK(max_abs_diff(base.sigma_n, shifted.sigma_n) < 1e-10);
}

TEST_CASE("skeleton json round trip and line-precise parse errors") {
    Skeleton s = chain(4);
    s.hub_joint = 2;
    const std::string path = "test_skeleton_roundtrip.json";
    save_skeleton_json(s, path);
    const Skeleton loaded = load_skeleton_json(path);
    CHECK(loaded.joint_names == s.joint_names);
    CHECK(loaded.edges == s.edges);
    CHECK(loaded.bone_lengths == s.bone_lengths);
    CHECK(loaded.hub_joint == s.hub_joint);
    std::remove(path.c_str());

    const std::string bad_path = "test_skeleton_bad.json";
    {
        std::ofstream out(bad_path);
        out << "{\n  \"joints\": [\"a\", \"b\"],\n  \"edges\": [[0, 1]\n}\n";
    }
    CHECK_THROWS_WITH_AS(load_skeleton_json(bad_path), doctest::Contains(":4"), ValidationError);
    std::remove(bad_path.c_str());
}

TEST_CASE("eigendecomposition reconstructs larger matrices") {
    Rng rng(99);
    for (int n : {8, 24, 64}) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                const double v = rng.normal();
                m(i, j) = v;
                m(j, i) = v;
            }
        const EigSym eig = eig_symmetric(m);
        CHECK(std::is_sorted(eig.values.begin(), eig.values.end()));
        const Mat recon = sandwich_diag(eig.vectors, eig.values);
        CHECK(rel_frobenius_error(recon, m) < 1e-10);
    }
}
