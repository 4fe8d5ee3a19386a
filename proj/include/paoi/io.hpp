#ifndef PAOI_IO_HPP
#define PAOI_IO_HPP

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "paoi/model.hpp"

namespace paoi {

// 17 significant digits round-trips IEEE doubles exactly.
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

using Metadata = std::map<std::string, std::string>;

inline void write_metadata(const std::string& path, const Metadata& meta) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    for (const auto& [k, v] : meta) os << k << "=" << v << "\n";
}

inline Metadata read_metadata(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    Metadata meta;
    std::string line;
    while (std::getline(is, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        meta[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return meta;
}

inline void save_layout(const Layout& layout, const std::string& path,
                        const Metadata& extra = {}) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << "link,tx_x,tx_y,rx_x,rx_y\n";
    for (std::size_t i = 0; i < layout.n_links(); ++i)
        os << i << "," << fmt_double(layout.tx_pos[i].x) << "," << fmt_double(layout.tx_pos[i].y)
           << "," << fmt_double(layout.rx_pos[i].x) << "," << fmt_double(layout.rx_pos[i].y)
           << "\n";
    if (!os) throw std::runtime_error("write failed for " + path);
    Metadata meta = extra;
    meta["side_length"] = fmt_double(layout.side_length);
    meta["n_links"] = std::to_string(layout.n_links());
    write_metadata(path + ".meta", meta);
}

inline Layout load_layout(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    Metadata meta = read_metadata(path + ".meta");
    Layout layout;
    layout.side_length = std::stod(meta.at("side_length"));
    std::string line;
    std::getline(is, line);  // header
    if (line.rfind("link,", 0) != 0) throw std::runtime_error("bad layout header in " + path);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        std::vector<double> vals;
        std::getline(ss, field, ',');  // link index
        while (std::getline(ss, field, ',')) vals.push_back(std::stod(field));
        if (vals.size() != 4) throw std::runtime_error("bad layout row in " + path);
        layout.tx_pos.push_back({vals[0], vals[1]});
        layout.rx_pos.push_back({vals[2], vals[3]});
    }
    layout.validate();
    return layout;
}

inline void save_policy(const Policy& pol, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << "link,p\n";
    for (std::size_t i = 0; i < pol.size(); ++i) os << i << "," << fmt_double(pol.p[i]) << "\n";
}

inline Policy load_policy(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    Policy pol;
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        pol.p.push_back(std::stod(line.substr(comma + 1)));
    }
    pol.validate();
    return pol;
}

/// Column-oriented CSV writer; every table gets a header row and a sibling
/// metadata file carrying the generating config and seeds.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& header, const Metadata& meta)
        : os_(path) {
        if (!os_) throw std::runtime_error("cannot open " + path);
        os_ << header << "\n";
        write_metadata(path + ".meta", meta);
    }
    template <typename... Fields>
    void row(const Fields&... fields) {
        bool first = true;
        ((os_ << (first ? "" : ","), first = false, put(fields)), ...);
        os_ << "\n";
    }

private:
    void put(double v) { os_ << fmt_double(v); }
    void put(const std::string& v) { os_ << v; }
    void put(const char* v) { os_ << v; }
    template <typename T>
    void put(const T& v) { os_ << v; }
    std::ofstream os_;
};

}  // namespace paoi

#endif
