// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "voxpad/error.hpp"
#include "voxpad/keys.hpp"
#include "voxpad/matrix.hpp"

namespace voxpad {

enum class VoxelOrigin : std::uint8_t { Original, Padded };

// The central structure: a grid level plus an associative map from voxel
// keys to feature rows, with a per-row origin flag. Rows are kept in
// canonical order (sorted keys, batch-major) so every downstream output is
// deterministic and diffable. Treat instances as immutable once built.
template <class S>
struct SparseTensor {
    GridSpec spec;
    std::vector<VoxelKey> keys;  // sorted, unique
    Matrix<S> features;          // keys.size() x channels
    std::vector<VoxelOrigin> origin;
    std::unordered_map<VoxelKey, int, VoxelKeyHash> index;  // key -> row

    int rows() const { return int(keys.size()); }
    int channels() const { return features.cols; }

    int find_row(const VoxelKey& k) const {
        auto it = index.find(k);
        return it == index.end() ? -1 : it->second;
    }
    bool contains(const VoxelKey& k) const { return index.count(k) != 0; }

    int original_count() const {
        int m = 0;
        for (VoxelOrigin o : origin) m += (o == VoxelOrigin::Original) ? 1 : 0;
        return m;
    }

    void rebuild_index() {
        index.clear();
        index.reserve(keys.size() * 2);
        for (std::size_t r = 0; r < keys.size(); ++r) {
            if (!index.emplace(keys[r], int(r)).second)
                throw InvalidInputError("SparseTensor: duplicate key " + to_string(keys[r]));
        }
    }

    // Test and construction helper: checks the documented invariants.
    void validate() const {
        if (keys.size() != std::size_t(features.rows) || keys.size() != origin.size())
            throw ShapeError("SparseTensor: row count mismatch between keys/features/flags");
        if (index.size() != keys.size()) throw ShapeError("SparseTensor: index size mismatch");
        for (std::size_t r = 0; r + 1 < keys.size(); ++r)
            if (!(keys[r] < keys[r + 1])) throw InvalidInputError("SparseTensor: keys not in canonical order");
        for (std::size_t r = 0; r < keys.size(); ++r) {
            auto it = index.find(keys[r]);
            if (it == index.end() || it->second != int(r))
                throw InvalidInputError("SparseTensor: index is not a bijection onto rows");
        }
    }
};

// Builds a tensor from unsorted parallel arrays, sorting rows into canonical
// key order. Duplicate keys are rejected.
template <class S>
SparseTensor<S> make_sparse_tensor(const GridSpec& spec, std::vector<VoxelKey> keys, Matrix<S> features,
                                   std::vector<VoxelOrigin> origin) {
    if (keys.size() != std::size_t(features.rows) || keys.size() != origin.size())
        throw ShapeError("make_sparse_tensor: row count mismatch");

    std::vector<int> perm(keys.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(), [&](int a, int b) { return keys[a] < keys[b]; });

    SparseTensor<S> t;
    t.spec = spec;
    t.keys.resize(keys.size());
    t.features = Matrix<S>(features.rows, features.cols);
    t.origin.resize(origin.size());
    for (std::size_t r = 0; r < perm.size(); ++r) {
        const int src = perm[r];
        t.keys[r] = keys[src];
        t.origin[r] = origin[src];
        auto dst = t.features.row(int(r));
        auto s = features.row(src);
        std::copy(s.begin(), s.end(), dst.begin());
    }
    t.rebuild_index();
    t.validate();
    return t;
}

}  // namespace voxpad
