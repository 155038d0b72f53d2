// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "voxpad/matrix.hpp"

namespace voxpad {

//============================================================================
// Checkpoints: a versioned binary map name -> 2D array, with the resolved
// run configuration embedded as text so evaluation can rebuild the exact
// model. Raw little-endian scalar bytes; round-trips are bit-exact.
//
// Layout:
//   "voxpad-checkpoint-v1\n"
//   u32 precision (32|64)   u32 config_len   config bytes
//   u32 array_count
//   repeated: u32 name_len, name bytes, i32 rows, i32 cols, payload
//============================================================================

inline constexpr const char* kCheckpointMagic = "voxpad-checkpoint-v1\n";

template <class Scalar>
struct Checkpoint {
    std::string config_text;
    std::vector<std::pair<std::string, Matrix<Scalar>>> arrays;

    const Matrix<Scalar>* find(const std::string& name) const {
        for (const auto& [n, m] : arrays)
            if (n == name) return &m;
        return nullptr;
    }
};

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {(unsigned char)(v), (unsigned char)(v >> 8), (unsigned char)(v >> 16),
                          (unsigned char)(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw InvalidInputError("checkpoint: truncated file");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

}  // namespace detail

template <class Scalar>
void save_checkpoint(const std::string& path, const Checkpoint<Scalar>& ckpt) {
    static_assert(sizeof(Scalar) == 4 || sizeof(Scalar) == 8);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw InvalidInputError("checkpoint: cannot open '" + path + "' for writing");
    os.write(kCheckpointMagic, std::streamsize(std::strlen(kCheckpointMagic)));
    detail::write_u32(os, sizeof(Scalar) == 4 ? 32u : 64u);
    detail::write_u32(os, std::uint32_t(ckpt.config_text.size()));
    os.write(ckpt.config_text.data(), std::streamsize(ckpt.config_text.size()));
    detail::write_u32(os, std::uint32_t(ckpt.arrays.size()));
    for (const auto& [name, m] : ckpt.arrays) {
        detail::write_u32(os, std::uint32_t(name.size()));
        os.write(name.data(), std::streamsize(name.size()));
        detail::write_u32(os, std::uint32_t(m.rows));
        detail::write_u32(os, std::uint32_t(m.cols));
        os.write(reinterpret_cast<const char*>(m.data.data()),
                 std::streamsize(m.data.size() * sizeof(Scalar)));
    }
    if (!os) throw InvalidInputError("checkpoint: write failed for '" + path + "'");
}

// Peeks at the stored precision (32 or 64) without loading arrays.
inline int checkpoint_precision(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InvalidInputError("checkpoint: cannot open '" + path + "'");
    std::string magic(std::strlen(kCheckpointMagic), '\0');
    is.read(magic.data(), std::streamsize(magic.size()));
    if (!is || magic != kCheckpointMagic) throw InvalidInputError("checkpoint: bad magic in '" + path + "'");
    return int(detail::read_u32(is));
}

template <class Scalar>
Checkpoint<Scalar> load_checkpoint(const std::string& path) {
    static_assert(sizeof(Scalar) == 4 || sizeof(Scalar) == 8);
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InvalidInputError("checkpoint: cannot open '" + path + "'");
    std::string magic(std::strlen(kCheckpointMagic), '\0');
    is.read(magic.data(), std::streamsize(magic.size()));
    if (!is || magic != kCheckpointMagic) throw InvalidInputError("checkpoint: bad magic in '" + path + "'");
    const std::uint32_t precision = detail::read_u32(is);
    const std::uint32_t expect = sizeof(Scalar) == 4 ? 32u : 64u;
    if (precision != expect)
        throw InvalidInputError("checkpoint: stored precision " + std::to_string(precision) +
                                " does not match requested " + std::to_string(expect));
    Checkpoint<Scalar> ckpt;
    const std::uint32_t cfg_len = detail::read_u32(is);
    ckpt.config_text.resize(cfg_len);
    is.read(ckpt.config_text.data(), std::streamsize(cfg_len));
    const std::uint32_t count = detail::read_u32(is);
    for (std::uint32_t a = 0; a < count; ++a) {
        const std::uint32_t name_len = detail::read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), std::streamsize(name_len));
        const int rows = int(detail::read_u32(is));
        const int cols = int(detail::read_u32(is));
        Matrix<Scalar> m(rows, cols);
        is.read(reinterpret_cast<char*>(m.data.data()), std::streamsize(m.data.size() * sizeof(Scalar)));
        if (!is) throw InvalidInputError("checkpoint: truncated array '" + name + "'");
        ckpt.arrays.emplace_back(std::move(name), std::move(m));
    }
    return ckpt;
}

}  // namespace voxpad
