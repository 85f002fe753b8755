#include "bsr/io/csv.hpp"

#include <charconv>
#include <sstream>

#include <fmt/format.h>

namespace bsr::io {

std::string num(double v) { return fmt::format("{}", v); }

CsvWriter::CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
    : path_(path), width_(header.size()) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path);
    if (!out_) throw CsvError("cannot write " + path.string());
    row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    if (fields.size() != width_) {
        throw CsvError(fmt::format("{}: row has {} fields, header has {}", path_.string(), fields.size(), width_));
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << fields[i];
    }
    out_ << '\n';
}

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

CsvTable CsvTable::parse(std::string_view text, const std::string& origin) {
    CsvTable t;
    t.origin_ = origin;
    std::istringstream in{std::string(text)};
    std::string line;
    bool first = true;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto fields = split(line);
        if (first) {
            t.header_ = std::move(fields);
            first = false;
            continue;
        }
        if (fields.size() != t.header_.size()) {
            throw CsvError(fmt::format("{}:{}: expected {} fields, got {}", origin, lineno, t.header_.size(), fields.size()));
        }
        t.rows_.push_back(std::move(fields));
    }
    if (first) throw CsvError(origin + ": missing header");
    return t;
}

CsvTable CsvTable::read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CsvError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

bool CsvTable::has_column(std::string_view name) const {
    for (const auto& h : header_) {
        if (h == name) return true;
    }
    return false;
}

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header_.size(); ++i) {
        if (header_[i] == name) return i;
    }
    throw CsvError(fmt::format("{}: no column '{}'", origin_, name));
}

const std::string& CsvTable::at(std::size_t row, std::string_view col) const { return rows_.at(row).at(column(col)); }

double CsvTable::number(std::size_t row, std::string_view col) const {
    const std::string& s = at(row, col);
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw CsvError(fmt::format("{}: row {} column {}: '{}' is not a number", origin_, row + 2, col, s));
    }
}

long CsvTable::integer(std::size_t row, std::string_view col) const {
    const std::string& s = at(row, col);
    long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw CsvError(fmt::format("{}: row {} column {}: '{}' is not an integer", origin_, row + 2, col, s));
    }
    return v;
}

}  // namespace bsr::io
