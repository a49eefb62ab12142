#include "semrd/points_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "semrd/error.hpp"

namespace semrd {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string content_hash(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

const char* kBaseHeader = "method,alpha1,alpha2,d_o,d_s,rate_bits,rate_nats,iterations,converged";

bool any_bounds(const std::vector<PointsRow>& rows) {
    for (const auto& r : rows)
        if (r.r_o_bits || r.r_s_bits) return true;
    return false;
}

}  // namespace

void write_points_csv(const std::string& path, const std::vector<PointsRow>& rows) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot open points file for writing: " + path);
    const bool bounds = any_bounds(rows);
    out << kBaseHeader;
    if (bounds) out << ",r_o_bits,r_s_bits";
    out << '\n';
    for (const auto& r : rows) {
        const RDPoint& p = r.point;
        out << method_name(p.method) << ',' << format_double(p.alpha1) << ','
            << format_double(p.alpha2) << ',' << format_double(p.d_o) << ','
            << format_double(p.d_s) << ',' << format_double(p.rate_bits) << ','
            << format_double(p.rate_nats) << ',' << p.iterations << ','
            << (p.converged ? 1 : 0);
        if (bounds) {
            out << ',' << (r.r_o_bits ? format_double(*r.r_o_bits) : "");
            out << ',' << (r.r_s_bits ? format_double(*r.r_s_bits) : "");
        }
        out << '\n';
    }
}

void write_points_json(const std::string& path, const std::vector<PointsRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json row;
        row["method"] = method_name(r.point.method);
        row["alpha1"] = r.point.alpha1;
        row["alpha2"] = r.point.alpha2;
        row["d_o"] = r.point.d_o;
        row["d_s"] = r.point.d_s;
        row["rate_bits"] = r.point.rate_bits;
        row["rate_nats"] = r.point.rate_nats;
        row["iterations"] = r.point.iterations;
        row["converged"] = r.point.converged;
        if (r.r_o_bits) row["r_o_bits"] = *r.r_o_bits;
        if (r.r_s_bits) row["r_s_bits"] = *r.r_s_bits;
        arr.push_back(std::move(row));
    }
    std::ofstream out(path);
    if (!out) throw DomainError("cannot open points file for writing: " + path);
    out << arr.dump(2) << '\n';
}

std::vector<PointsRow> read_points_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open points file: " + path);
    std::string line;
    long line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty points file", 0);
    ++line_no;
    const bool bounds = line.rfind(std::string(kBaseHeader) + ",r_o_bits,r_s_bits", 0) == 0;
    if (!bounds && line != kBaseHeader)
        throw ParseError("unrecognized points header", line_no);

    std::vector<PointsRow> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::istringstream ls(line);
        std::string field;
        while (std::getline(ls, field, ',')) f.push_back(field);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        const std::size_t expected = bounds ? 11 : 9;
        if (f.size() != expected)
            throw ParseError("expected " + std::to_string(expected) + " fields", line_no);
        try {
            PointsRow r;
            r.point.method = method_from_name(f[0]);
            r.point.alpha1 = std::stod(f[1]);
            r.point.alpha2 = std::stod(f[2]);
            r.point.d_o = std::stod(f[3]);
            r.point.d_s = std::stod(f[4]);
            r.point.rate_bits = std::stod(f[5]);
            r.point.rate_nats = std::stod(f[6]);
            r.point.iterations = std::stoi(f[7]);
            r.point.converged = f[8] == "1" || f[8] == "true";
            if (bounds) {
                if (!f[9].empty()) r.r_o_bits = std::stod(f[9]);
                if (!f[10].empty()) r.r_s_bits = std::stod(f[10]);
            }
            rows.push_back(std::move(r));
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(std::string("bad row: ") + e.what(), line_no);
        }
    }
    return rows;
}

void write_manifest(const std::string& path, const Manifest& m) {
    nlohmann::json j;
    j["mode"] = m.mode;
    j["config_hash"] = m.config_hash;
    j["seed"] = m.seed;
    j["workers"] = m.workers;
    j["version"] = m.version;
    j["wall_seconds"] = m.wall_seconds;
    j["rows"] = m.rows;
    j["created_unix"] = m.created_unix;
    std::ofstream out(path);
    if (!out) throw DomainError("cannot open manifest for writing: " + path);
    out << j.dump(2) << '\n';
}

}  // namespace semrd
