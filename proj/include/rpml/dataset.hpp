#ifndef RPML_DATASET_HPP_
#define RPML_DATASET_HPP_

#include <cerrno>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "rpml/common.hpp"

namespace rpml {

enum class FileFormat { Csv, Binary };

// ".csv" means CSV, everything else the binary container.
inline FileFormat detect_format(const std::string& path) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0)
        return FileFormat::Csv;
    return FileFormat::Binary;
}

namespace detail {

constexpr char kMagic[4] = {'R', 'P', 'M', 'L'};
constexpr std::uint32_t kVersion = 1;

inline void check_storable(const Matrix& m, const std::string& what) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            if (!std::isfinite(static_cast<float>(m(i, j))))
                throw DataError(what + ": value not storable at (row " + std::to_string(i) +
                                ", col " + std::to_string(j) + ")");
}

// Storage precision is 32-bit; 9 significant decimal digits round-trip it.
// to_chars / from_chars keep parsing and printing locale-independent.
inline std::string format_value(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf),
                                   static_cast<double>(static_cast<float>(v)),
                                   std::chars_format::general, 9);
    return std::string(buf, res.ptr);
}

inline bool parse_double(const std::string& token, double& out) {
    const char* begin = token.c_str();
    const char* end = begin + token.size();
    if (begin != end && *begin == '+') // from_chars rejects an explicit sign
        ++begin;
    const auto res = std::from_chars(begin, end, out);
    return begin != end && res.ec == std::errc() && res.ptr == end;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            tokens.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    tokens.push_back(cur);
    // trim whitespace
    for (auto& t : tokens) {
        const auto b = t.find_first_not_of(" \t");
        const auto e = t.find_last_not_of(" \t");
        t = (b == std::string::npos) ? std::string() : t.substr(b, e - b + 1);
    }
    return tokens;
}

} // namespace detail

inline Matrix load_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open " + path + ": " + std::strerror(errno));
    std::vector<std::vector<double>> rows;
    std::string line;
    bool maybe_header = true;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r")
            continue;
        const auto tokens = detail::split_csv_line(line);
        if (maybe_header) {
            maybe_header = false;
            double probe;
            if (!detail::parse_double(tokens[0], probe))
                continue; // header line, skip it
        }
        if (rows.empty())
            width = tokens.size();
        if (tokens.size() != width)
            throw DataError(path + ": row " + std::to_string(rows.size()) + " has " +
                            std::to_string(tokens.size()) + " values, expected " +
                            std::to_string(width));
        std::vector<double> row(width);
        for (std::size_t j = 0; j < width; ++j) {
            double v;
            if (!detail::parse_double(tokens[j], v))
                throw DataError(path + ": cannot parse value at (row " +
                                std::to_string(rows.size()) + ", col " + std::to_string(j) + ")");
            if (!std::isfinite(v))
                throw DataError(path + ": non-finite value at (row " +
                                std::to_string(rows.size()) + ", col " + std::to_string(j) + ")");
            // storage precision is 32-bit for both formats
            const double stored = static_cast<double>(static_cast<float>(v));
            if (!std::isfinite(stored))
                throw DataError(path + ": value exceeds storage range at (row " +
                                std::to_string(rows.size()) + ", col " + std::to_string(j) + ")");
            row[j] = stored;
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw DataError(path + ": empty dataset");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < width; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

inline Matrix load_matrix_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open " + path + ": " + std::strerror(errno));
    char magic[4];
    std::uint32_t version = 0;
    std::uint64_t rows = 0, cols = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
    in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
    if (!in || std::memcmp(magic, detail::kMagic, 4) != 0)
        throw DataError(path + ": not a matrix container (bad magic)");
    if (version != detail::kVersion)
        throw DataError(path + ": unsupported container version " + std::to_string(version));
    if (rows == 0 || cols == 0)
        throw DataError(path + ": empty dataset");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::vector<float> buf(cols);
    for (std::uint64_t i = 0; i < rows; ++i) {
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(cols * sizeof(float)));
        if (!in)
            throw DataError(path + ": truncated at row " + std::to_string(i));
        for (std::uint64_t j = 0; j < cols; ++j) {
            const double v = static_cast<double>(buf[j]);
            if (!std::isfinite(v))
                throw DataError(path + ": non-finite value at (row " + std::to_string(i) +
                                ", col " + std::to_string(j) + ")");
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    }
    return m;
}

inline void save_matrix_csv(const Matrix& m, const std::string& path) {
    detail::check_storable(m, path);
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write " + path + ": " + std::strerror(errno));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j)
                out << ',';
            out << detail::format_value(m(i, j));
        }
        out << '\n';
    }
    if (!out.flush())
        throw DataError("write failed for " + path + ": " + std::strerror(errno));
}

inline void save_matrix_binary(const Matrix& m, const std::string& path) {
    detail::check_storable(m, path);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot write " + path + ": " + std::strerror(errno));
    out.write(detail::kMagic, 4);
    const std::uint32_t version = detail::kVersion;
    const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
    const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    std::vector<float> buf(cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            buf[static_cast<std::size_t>(j)] = static_cast<float>(m(i, j));
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(cols * sizeof(float)));
    }
    if (!out.flush())
        throw DataError("write failed for " + path + ": " + std::strerror(errno));
}

inline Matrix load_features(const std::string& path, FileFormat format) {
    Matrix m = (format == FileFormat::Csv) ? load_matrix_csv(path) : load_matrix_binary(path);
    if (m.rows() < 1 || m.cols() < 1)
        throw DataError(path + ": empty dataset");
    return m;
}

inline Matrix load_features(const std::string& path) {
    return load_features(path, detect_format(path));
}

inline void save_features(const Matrix& m, const std::string& path, FileFormat format) {
    if (format == FileFormat::Csv)
        save_matrix_csv(m, path);
    else
        save_matrix_binary(m, path);
}

inline void save_features(const Matrix& m, const std::string& path) {
    save_features(m, path, detect_format(path));
}

// Embeddings always use the binary container; load is bit-exact.
inline void save_embedding(const Matrix& L, const std::string& path) {
    save_matrix_binary(L, path);
}

inline Matrix load_embedding(const std::string& path) {
    return load_matrix_binary(path);
}

// Labels: one non-negative integer per line.
inline Labels load_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open " + path + ": " + std::strerror(errno));
    Labels labels;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        char* end = nullptr;
        const long v = std::strtol(line.c_str(), &end, 10);
        if (end == line.c_str() || *end != '\0')
            throw DataError(path + ": cannot parse label at line " +
                            std::to_string(labels.size() + 1));
        if (v < 0)
            throw DataError(path + ": negative label at line " +
                            std::to_string(labels.size() + 1));
        labels.push_back(static_cast<int>(v));
    }
    if (labels.empty())
        throw DataError(path + ": empty labels file");
    return labels;
}

inline void save_labels(const Labels& labels, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write " + path + ": " + std::strerror(errno));
    for (int v : labels)
        out << v << '\n';
    if (!out.flush())
        throw DataError("write failed for " + path + ": " + std::strerror(errno));
}

} // namespace rpml

#endif // RPML_DATASET_HPP_
