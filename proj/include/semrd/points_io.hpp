#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "semrd/core.hpp"

namespace semrd {

// One output row; the bound columns are optional companions used by verify.
struct PointsRow {
    RDPoint point;
    std::optional<double> r_o_bits;
    std::optional<double> r_s_bits;
};

// Fixed column order:
// method,alpha1,alpha2,d_o,d_s,rate_bits,rate_nats,iterations,converged[,r_o_bits,r_s_bits]
void write_points_csv(const std::string& path, const std::vector<PointsRow>& rows);
void write_points_json(const std::string& path, const std::vector<PointsRow>& rows);
std::vector<PointsRow> read_points_csv(const std::string& path);

// Deterministic decimal rendering used in every emitted table.
std::string format_double(double v);

// FNV-1a 64-bit, hex-encoded; used as the config fingerprint in manifests.
std::string content_hash(const std::string& text);

struct Manifest {
    std::string mode;
    std::string config_hash;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::string version;
    double wall_seconds = 0.0;
    std::size_t rows = 0;
    std::int64_t created_unix = 0;
};

void write_manifest(const std::string& path, const Manifest& m);

}  // namespace semrd
