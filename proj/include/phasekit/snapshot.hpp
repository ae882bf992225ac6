#pragma once

#include "phasekit/legendre.hpp"
#include "phasekit/tensor.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

namespace phasekit {

/// Physical-grid snapshot of a field at one step.
struct Snapshot {
    long step = 0;
    double time = 0.0;
    GridValues values;
};

// Binary layout (little-endian host order):
//   offset 0  char[4]  "PFK1"
//   offset 4  uint32   dim
//   offset 8  uint32   M (modes; grid extent is 2M)
//   offset 12 uint32   reserved, 0
//   offset 16 uint64   step
//   offset 24 float64  time
//   offset 32 float64[(2M)^dim], x fastest
inline constexpr char kSnapshotMagic[4] = {'P', 'F', 'K', '1'};
inline constexpr std::size_t kSnapshotHeaderBytes = 32;

inline void write_snapshot(const std::string& path, const Snapshot& snap) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    unsigned char header[kSnapshotHeaderBytes] = {};
    const std::uint32_t dim = snap.values.dim();
    const std::uint32_t M = snap.values.extent() / 2;
    const std::uint32_t reserved = 0;
    const std::uint64_t step = static_cast<std::uint64_t>(snap.step);
    std::memcpy(header, kSnapshotMagic, 4);
    std::memcpy(header + 4, &dim, 4);
    std::memcpy(header + 8, &M, 4);
    std::memcpy(header + 12, &reserved, 4);
    std::memcpy(header + 16, &step, 8);
    std::memcpy(header + 24, &snap.time, 8);
    out.write(reinterpret_cast<const char*>(header), kSnapshotHeaderBytes);
    out.write(reinterpret_cast<const char*>(snap.values.data().data()),
              static_cast<std::streamsize>(snap.values.size() * sizeof(double)));
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline Snapshot read_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open snapshot " + path);
    unsigned char header[kSnapshotHeaderBytes];
    in.read(reinterpret_cast<char*>(header), kSnapshotHeaderBytes);
    if (!in || std::memcmp(header, kSnapshotMagic, 4) != 0) throw std::runtime_error(path + ": not a PFK1 snapshot");
    std::uint32_t dim, M;
    std::uint64_t step;
    Snapshot snap;
    std::memcpy(&dim, header + 4, 4);
    std::memcpy(&M, header + 8, 4);
    std::memcpy(&step, header + 16, 8);
    std::memcpy(&snap.time, header + 24, 8);
    if ((dim != 2 && dim != 3) || M < 2 || M > 4096) throw std::runtime_error(path + ": bad snapshot header");
    snap.step = static_cast<long>(step);
    snap.values = GridValues(static_cast<int>(dim), static_cast<int>(2 * M));
    in.read(reinterpret_cast<char*>(snap.values.data().data()),
            static_cast<std::streamsize>(snap.values.size() * sizeof(double)));
    if (!in) throw std::runtime_error(path + ": truncated snapshot");
    return snap;
}

/// Plain-text export of the coordinate planes through the origin (z=0, y=0,
/// x=0 in 3-D; the whole plane in 2-D). Planes are sampled at the Gauss nodes
/// of the in-plane directions, with the field evaluated exactly at 0 across.
inline void write_slices_csv(const std::string& path, const Field& u, const SpectralBasis1D& basis) {
    check_conforms(u, basis);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "plane,x,y,z,phi\n";
    const auto& nodes = basis.quad.nodes;
    const int Q = basis.Q();
    const int M = basis.M;
    char buf[160];
    if (u.dim() == 2) {
        const GridValues g = to_grid(u, basis);
        for (int j = 0; j < Q; ++j)
            for (int i = 0; i < Q; ++i) {
                std::snprintf(buf, sizeof buf, "z=0,%.17g,%.17g,0,%.17g\n", nodes[i], nodes[j], g.at(i, j));
                out << buf;
            }
        return;
    }
    // basis values at the origin
    Eigen::RowVectorXd at0(M);
    for (int k = 0; k < M; ++k) at0[k] = basis_eval(k, 0.0);
    const Eigen::MatrixXd& S = basis.synthesis;
    auto value = [&](auto&& ex, auto&& ey, auto&& ez) {
        double s = 0.0;
        for (int k = 0; k < M; ++k)
            for (int j = 0; j < M; ++j)
                for (int i = 0; i < M; ++i) s += u.at(i, j, k) * ex(i) * ey(j) * ez(k);
        return s;
    };
    auto origin = [&](int k) { return at0[k]; };
    for (int b = 0; b < Q; ++b)
        for (int a = 0; a < Q; ++a) {
            auto ea = [&](int k) { return S(a, k); };
            auto eb = [&](int k) { return S(b, k); };
            std::snprintf(buf, sizeof buf, "z=0,%.17g,%.17g,0,%.17g\n", nodes[a], nodes[b], value(ea, eb, origin));
            out << buf;
            std::snprintf(buf, sizeof buf, "y=0,%.17g,0,%.17g,%.17g\n", nodes[a], nodes[b], value(ea, origin, eb));
            out << buf;
            std::snprintf(buf, sizeof buf, "x=0,0,%.17g,%.17g,%.17g\n", nodes[a], nodes[b], value(origin, ea, eb));
            out << buf;
        }
}

}  // namespace phasekit
