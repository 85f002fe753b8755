#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bsr::io {

class CsvError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shortest decimal form that parses back to the same double.
std::string num(double v);

// Plain comma-separated writer; fields must not contain commas or newlines.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, std::vector<std::string> header);
    void row(const std::vector<std::string>& fields);

private:
    std::ofstream out_;
    std::filesystem::path path_;
    std::size_t width_;
};

class CsvTable {
public:
    static CsvTable read(const std::filesystem::path& path);
    static CsvTable parse(std::string_view text, const std::string& origin = "<text>");

    const std::vector<std::string>& header() const { return header_; }
    std::size_t rows() const { return rows_.size(); }
    std::size_t column(std::string_view name) const;  // throws on unknown column
    bool has_column(std::string_view name) const;
    const std::string& at(std::size_t row, std::string_view col) const;
    double number(std::size_t row, std::string_view col) const;
    long integer(std::size_t row, std::string_view col) const;

private:
    std::string origin_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace bsr::io
