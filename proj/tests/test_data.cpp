// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <vector>

#include "voxpad/metrics.hpp"
#include "voxpad/padding.hpp"
#include "voxpad/synth.hpp"
#include "voxpad/voxelize.hpp"

using namespace voxpad;

namespace {

// Label oracle for the checker task, written straight from the definition.
int checker_label(const Point3& p, double s_label) {
    const long long cell = (long long)std::floor(p.x / s_label) +
                           (long long)std::floor(p.y / s_label) +
                           (long long)std::floor(p.z / s_label);
    return int(((cell % 2) + 2) % 2);
}

// Voxel keys by raw floor arithmetic, independent of containing_voxel_key.
std::map<std::array<long long, 3>, std::map<int, int>> bucket_labels(const PointCloud& cloud,
                                                                     double s) {
    std::map<std::array<long long, 3>, std::map<int, int>> buckets;
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        const Point3& p = cloud.points[i];
        std::array<long long, 3> key = {(long long)std::floor(p.x / s),
                                        (long long)std::floor(p.y / s),
                                        (long long)std::floor(p.z / s)};
        ++buckets[key][cloud.labels[i]];
    }
    return buckets;
}

bool kernel3_connected(const std::vector<VoxelKey>& keys, const VoxelKey& a, const VoxelKey& b) {
    std::set<VoxelKey> nodes(keys.begin(), keys.end());
    if (!nodes.count(a) || !nodes.count(b)) return false;
    std::set<VoxelKey> seen = {a};
    std::queue<VoxelKey> frontier;
    frontier.push(a);
    while (!frontier.empty()) {
        VoxelKey cur = frontier.front();
        frontier.pop();
        if (cur == b) return true;
        for (int di = -1; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj)
                for (int dk = -1; dk <= 1; ++dk) {
                    VoxelKey next{cur.i + di, cur.j + dj, cur.k + dk, cur.batch};
                    if (nodes.count(next) && !seen.count(next)) {
                        seen.insert(next);
                        frontier.push(next);
                    }
                }
    }
    return false;
}

}  // namespace

TEST_CASE("checker labels follow the documented parity formula") {
    CHECK(checker_label({0.1, 0.1, 0.1}, 0.5) == 0);
    CHECK(checker_label({0.6, 0.1, 0.1}, 0.5) == 1);
    CHECK(checker_label({0.6, 0.6, 0.1}, 0.5) == 0);
    CHECK(checker_label({-0.1, 0.1, 0.1}, 0.5) == 1);  // floor(-0.2) = -1

    auto cloud = synth_subvoxel_checker(2000, 0.125, 7);
    REQUIRE(cloud.size() == 2000);
    REQUIRE(cloud.has_labels());
    REQUIRE(cloud.features.rows == 2000);
    REQUIRE(cloud.features.cols == 3);
    int ones = 0;
    const double w = 0.125 * 16;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Point3& p = cloud.points[i];
        CHECK(cloud.labels[i] == checker_label(p, 0.125));
        // slab geometry: one label cell thick in z, extent_cells wide in x/y
        CHECK(p.x >= 0.0);
        CHECK(p.x < w);
        CHECK(p.y < w);
        CHECK(p.z >= 0.0);
        CHECK(p.z < 0.125);
        // coordinates double as features
        CHECK(cloud.features(int(i), 0) == p.x);
        CHECK(cloud.features(int(i), 2) == p.z);
        ones += cloud.labels[i];
    }
    CHECK(ones > 500);  // both classes well represented
    CHECK(ones < 1500);
}

TEST_CASE("octant classes use x-major bit order") {
    CHECK(octant_class({1, 1, 1}) == 7);
    CHECK(octant_class({-1, -1, -1}) == 0);
    CHECK(octant_class({1, -1, -1}) == 4);
    CHECK(octant_class({-1, 1, -1}) == 2);
    CHECK(octant_class({-1, -1, 1}) == 1);
    CHECK(octant_class({1, 1, -1}) == 6);
}

TEST_CASE("sphere octant points sit on the sphere with octant labels") {
    auto cloud = synth_sphere_octant(500, 11, 2.0, 0.0);
    REQUIRE(cloud.size() == 500);
    std::set<int> seen;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Point3& p = cloud.points[i];
        const double r = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
        CHECK_THAT(r, Catch::Matchers::WithinAbs(2.0, 1e-9));
        CHECK(cloud.labels[i] == octant_class(p));
        seen.insert(cloud.labels[i]);
    }
    CHECK(seen.size() == 8);  // all octants hit with 500 points

    auto noisy = synth_sphere_octant(200, 11, 1.0, 0.1);
    bool off_sphere = false;
    for (const Point3& p : noisy.points) {
        const double r = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
        if (std::abs(r - 1.0) > 1e-6) off_sphere = true;
    }
    CHECK(off_sphere);
}

TEST_CASE("generators are pure functions of their seed") {
    auto a = synth_subvoxel_checker(300, 0.125, 42);
    auto b = synth_subvoxel_checker(300, 0.125, 42);
    auto c = synth_subvoxel_checker(300, 0.125, 43);
    CHECK(a.features.data == b.features.data);
    CHECK(a.labels == b.labels);
    CHECK(a.features.data != c.features.data);

    auto sa = synth_sphere_octant(300, 5);
    auto sb = synth_sphere_octant(300, 5);
    CHECK(sa.features.data == sb.features.data);

    CHECK_THROWS_AS(synth_subvoxel_checker(0, 0.125, 1), InvalidInputError);
    CHECK_THROWS_AS(synth_subvoxel_checker(10, -1.0, 1), InvalidInputError);
    CHECK_THROWS_AS(synth_sphere_octant(10, 1, 0.0), InvalidInputError);
}

TEST_CASE("disjoint pair stays split under zero padding and bridges under interp-aware") {
    const double s = 0.5;
    auto cloud = synth_disjoint_pair(s);
    REQUIRE(cloud.size() == 3);
    const GridSpec spec{{0, 0, 0}, s, 0};
    auto t = voxelize<double>(cloud, spec, FeatureMode::Mean);

    const VoxelKey a{0, 0, 0, 0}, b{2, 0, 0, 0};
    REQUIRE(t.rows() == 2);
    CHECK(t.contains(a));
    CHECK(t.contains(b));
    CHECK(std::max({std::abs(a.i - b.i), std::abs(a.j - b.j), std::abs(a.k - b.k)}) == 2);
    CHECK_FALSE(kernel3_connected(t.keys, a, b));

    const std::vector<PointCloud> clouds = {cloud};
    auto padded = apply_padding(t, PaddingScheme::interp_aware(), clouds);
    CHECK(padded.rows() >= 3);
    CHECK(padded.contains({1, 0, 0, 0}));
    CHECK(kernel3_connected(padded.keys, a, b));
}

TEST_CASE("miou counts pooled per-class intersections over unions") {
    std::vector<int> pred = {0, 0, 1, 1}, gt = {0, 1, 1, 1};
    auto m = miou(pred, gt, 2);
    CHECK_THAT(m.per_class_iou[0], Catch::Matchers::WithinAbs(0.5, 1e-15));
    CHECK_THAT(m.per_class_iou[1], Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-15));
    CHECK_THAT(m.miou, Catch::Matchers::WithinAbs(7.0 / 12.0, 1e-15));
    CHECK_THAT(m.accuracy, Catch::Matchers::WithinAbs(0.75, 1e-15));

    auto perfect = miou(gt, gt, 2);
    CHECK(perfect.miou == 1.0);
    CHECK(perfect.accuracy == 1.0);

    std::vector<int> inv = {1, 0, 0, 0};
    auto zero = miou(inv, gt, 2);
    CHECK(zero.miou == 0.0);
    CHECK(zero.accuracy == 0.0);

    // class 2 appears on neither side: skipped, flagged -1
    auto partial = miou(pred, gt, 3);
    CHECK(partial.per_class_iou[2] == -1.0);
    CHECK_THAT(partial.miou, Catch::Matchers::WithinAbs(7.0 / 12.0, 1e-15));

    std::vector<int> shorter = {0, 1};
    CHECK_THROWS_AS(miou(shorter, gt, 2), ShapeError);
    std::vector<int> bad = {0, 2, 1, 1};
    CHECK_THROWS_AS(miou(bad, gt, 2), InvalidInputError);
}

TEST_CASE("majority ceiling bounds any per-voxel-constant predictor") {
    const GridSpec unit{{0, 0, 0}, 1.0, 0};

    PointCloud split;  // one voxel, labels {0,0,1} -> 2/3
    split.points = {{0.2, 0.2, 0.2}, {0.4, 0.4, 0.4}, {0.8, 0.8, 0.8}};
    split.labels = {0, 0, 1};
    CHECK_THAT(majority_ceiling(split, unit), Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-15));

    PointCloud clean;  // one label per voxel -> 1.0
    clean.points = {{0.5, 0.5, 0.5}, {1.5, 0.5, 0.5}, {1.7, 0.3, 0.3}};
    clean.labels = {0, 1, 1};
    CHECK(majority_ceiling(clean, unit) == 1.0);

    PointCloud unlabeled;
    unlabeled.points = {{0.5, 0.5, 0.5}};
    CHECK_THROWS_AS(majority_ceiling(unlabeled, unit), InvalidInputError);

    // checker at s = 2*s_label: both classes in every voxel, ceiling < 1, and
    // it must equal the brute-force bucket count
    const double s_label = 0.125;
    auto cloud = synth_subvoxel_checker(4000, s_label, 3);
    const GridSpec spec{{0, 0, 0}, 2.0 * s_label, 0};
    const double got = majority_ceiling(cloud, spec);

    auto buckets = bucket_labels(cloud, 2.0 * s_label);
    long long best_total = 0;
    for (const auto& [key, per_class] : buckets) {
        int best = 0;
        for (const auto& [cls, cnt] : per_class) best = std::max(best, cnt);
        best_total += best;
    }
    CHECK_THAT(got, Catch::Matchers::WithinAbs(double(best_total) / 4000.0, 1e-15));
    CHECK(got < 1.0);
    CHECK(got > 0.5);  // majority vote beats coin flip
}

TEST_CASE("synth task descriptor dispatches and parses") {
    SynthTask task;
    task.kind = SynthKind::SphereOctant;
    task.points = 50;
    task.seed = 9;
    CHECK(task.name() == "sphere");
    CHECK(task.class_count() == 8);
    auto cloud = task.generate();
    CHECK(cloud.size() == 50);

    task.kind = SynthKind::SubVoxelChecker;
    CHECK(task.name() == "checker");
    CHECK(task.class_count() == 2);

    CHECK(parse_synth_kind("checker") == SynthKind::SubVoxelChecker);
    CHECK(parse_synth_kind("sphere") == SynthKind::SphereOctant);
    CHECK(parse_synth_kind("disjoint") == SynthKind::DisjointPair);
    CHECK_THROWS_AS(parse_synth_kind("bunny"), InvalidInputError);
}
