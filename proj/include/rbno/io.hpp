#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "rbno/linalg.hpp"

namespace rbno {

// Binary matrix file format "RBNO1":
//   magic "RBNO1\0" (6 bytes), u64 LE n_rows, u64 LE n_cols,
//   then n_rows*n_cols f64 LE values, row-major.
// Little-endian layout is asserted at compile configuration time for the
// supported targets; x86-64/aarch64 hosts store doubles LE natively.

inline void write_rbno1(const std::filesystem::path& path, const DenseMatrix& M) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("write_rbno1: cannot open " + path.string());
    const char magic[6] = {'R', 'B', 'N', 'O', '1', '\0'};
    f.write(magic, 6);
    std::uint64_t dims[2] = {static_cast<std::uint64_t>(M.rows()),
                             static_cast<std::uint64_t>(M.cols())};
    f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    f.write(reinterpret_cast<const char*>(M.data()),
            static_cast<std::streamsize>(sizeof(double) * M.rows() * M.cols()));
    if (!f) throw Error("write_rbno1: write failed for " + path.string());
}

inline void write_rbno1(const std::filesystem::path& path, const Vec& v) {
    DenseMatrix M(1, v.size());
    for (std::size_t i = 0; i < v.size(); ++i) M(0, i) = v[i];
    write_rbno1(path, M);
}

inline DenseMatrix read_rbno1(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("read_rbno1: cannot open " + path.string());
    char magic[6];
    f.read(magic, 6);
    if (!f || std::memcmp(magic, "RBNO1\0", 6) != 0)
        throw Error("read_rbno1: bad magic in " + path.string());
    std::uint64_t dims[2];
    f.read(reinterpret_cast<char*>(dims), sizeof(dims));
    if (!f) throw Error("read_rbno1: truncated header in " + path.string());
    DenseMatrix M(static_cast<std::size_t>(dims[0]), static_cast<std::size_t>(dims[1]));
    f.read(reinterpret_cast<char*>(M.data()),
           static_cast<std::streamsize>(sizeof(double) * M.rows() * M.cols()));
    if (!f) throw Error("read_rbno1: truncated data in " + path.string());
    return M;
}

inline Vec read_rbno1_vec(const std::filesystem::path& path) {
    DenseMatrix M = read_rbno1(path);
    Vec v(M.rows() * M.cols());
    std::memcpy(v.data(), M.data(), sizeof(double) * v.size());
    return v;
}

inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ull) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

// CSV writer with a fixed 17-significant-digit float format so outputs are
// byte-reproducible across runs with identical inputs.
class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path) : f_(path, std::ios::trunc) {
        if (!f_) throw Error("CsvWriter: cannot open " + path.string());
    }

    void header(const std::vector<std::string>& cols) { row_strings(cols); }

    void row_strings(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) f_ << ',';
            f_ << cells[i];
        }
        f_ << '\n';
    }

    static std::string fmt(double x) {
        std::ostringstream os;
        os << std::setprecision(17) << x;
        return os.str();
    }
    static std::string fmt(std::size_t x) { return std::to_string(x); }
    static std::string fmt(int x) { return std::to_string(x); }

private:
    std::ofstream f_;
};

}  // namespace rbno
