// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "voxpad/error.hpp"
#include "voxpad/keys.hpp"
#include "voxpad/matrix.hpp"

namespace voxpad {

// Point set with optional per-point features (uniform channel count) and
// optional integer class labels. Geometry is always double precision; it
// feeds key arithmetic, not network math.
struct PointCloud {
    std::vector<Point3> points;
    Matrix<double> features;  // rows == points.size() when present, else 0x0
    std::vector<int> labels;  // size == points.size() when present, else empty

    std::size_t size() const { return points.size(); }
    bool has_features() const { return features.rows > 0; }
    bool has_labels() const { return !labels.empty(); }

    void validate() const {
        if (has_features() && std::size_t(features.rows) != points.size())
            throw InvalidInputError("PointCloud: feature rows != point count");
        if (has_labels() && labels.size() != points.size())
            throw InvalidInputError("PointCloud: label count != point count");
        for (const Point3& p : points)
            if (!p.finite()) throw InvalidInputError("PointCloud: non-finite coordinate");
    }
};

// Text format, one point per line:
//   x y z [label] [f1 f2 ...]
// '#' starts a comment. A "# columns:" header pins the layout; without one,
// a 4th column is read as the label and any further columns as features.
inline constexpr const char* kPointCloudFormatHeader = "# voxpad-pointcloud-v1";

inline PointCloud parse_pointcloud_text(std::istream& in, const std::string& what = "<stream>") {
    PointCloud cloud;
    std::vector<double> feat_rows;
    int channels = -1;      // -1: not yet decided
    int have_labels = -1;   // -1: not yet decided
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            // A "# columns: x y z [label] [f1 ...]" header pins the layout.
            std::istringstream hs(line.substr(hash + 1));
            std::string tag;
            if (hs >> tag && tag == "columns:") {
                std::string col;
                int ncols = 0, lab = 0;
                while (hs >> col) {
                    ++ncols;
                    if (col == "label") lab = 1;
                }
                if (ncols < 3) throw InvalidInputError(what + ": malformed columns header");
                have_labels = lab;
                channels = ncols - 3 - lab;
            }
            line.resize(hash);
        }
        std::istringstream ls(line);
        double x, y, z;
        if (!(ls >> x)) continue;  // blank or comment-only line
        if (!(ls >> y >> z))
            throw InvalidInputError(what + ":" + std::to_string(lineno) + ": expected at least x y z");

        std::vector<double> rest;
        double v;
        while (ls >> v) rest.push_back(v);

        if (have_labels < 0) {  // no header: 4th column, when present, is the label
            have_labels = rest.empty() ? 0 : 1;
            channels = have_labels ? int(rest.size()) - 1 : 0;
        }
        if (int(rest.size()) != have_labels + channels)
            throw InvalidInputError(what + ":" + std::to_string(lineno) + ": inconsistent column count");

        cloud.points.push_back({x, y, z});
        if (have_labels) {
            const double lab = rest[0];
            if (lab != std::floor(lab))
                throw InvalidInputError(what + ":" + std::to_string(lineno) + ": label must be an integer");
            cloud.labels.push_back(int(lab));
        }
        feat_rows.insert(feat_rows.end(), rest.begin() + have_labels, rest.end());
    }
    if (channels > 0) {
        cloud.features = Matrix<double>(int(cloud.points.size()), channels);
        cloud.features.data = std::move(feat_rows);
    }
    cloud.validate();
    return cloud;
}

inline PointCloud load_pointcloud(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("cannot open point cloud file: " + path);
    return parse_pointcloud_text(in, path);
}

inline void write_pointcloud(std::ostream& out, const PointCloud& cloud) {
    cloud.validate();
    out << kPointCloudFormatHeader << "\n";
    out << "# columns: x y z";
    if (cloud.has_labels()) out << " label";
    for (int c = 0; c < cloud.features.cols; ++c) out << " f" << (c + 1);
    out << "\n";
    char buf[512];
    for (std::size_t n = 0; n < cloud.points.size(); ++n) {
        const Point3& p = cloud.points[n];
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g", p.x, p.y, p.z);
        out << buf;
        if (cloud.has_labels()) out << " " << cloud.labels[n];
        if (cloud.has_features())
            for (int c = 0; c < cloud.features.cols; ++c) {
                std::snprintf(buf, sizeof buf, " %.17g", cloud.features(int(n), c));
                out << buf;
            }
        out << "\n";
    }
}

inline void save_pointcloud(const std::string& path, const PointCloud& cloud) {
    std::ofstream out(path);
    if (!out) throw InvalidInputError("cannot write point cloud file: " + path);
    write_pointcloud(out, cloud);
}

}  // namespace voxpad
