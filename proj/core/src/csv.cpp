#include "epiflow/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "epiflow/errors.hpp"

namespace epiflow::csv {

namespace {

struct Parser {
    std::string_view text;
    std::string path;
    size_t pos = 0;
    int line = 1;

    bool at_end() const { return pos >= text.size(); }

    // Parses one record (possibly spanning lines inside quotes).
    // Returns false at end of input.
    bool next_record(std::vector<std::string>& fields, int& record_line) {
        // skip blank lines
        while (!at_end() && (text[pos] == '\n' || text[pos] == '\r')) {
            if (text[pos] == '\n') ++line;
            ++pos;
        }
        if (at_end()) return false;
        record_line = line;
        fields.clear();
        std::string field;
        bool in_quotes = false;
        for (;;) {
            if (at_end()) {
                if (in_quotes) {
                    throw ValidationError(path + ":" + std::to_string(record_line) +
                                          ": unterminated quoted field");
                }
                fields.push_back(std::move(field));
                return true;
            }
            char c = text[pos];
            if (in_quotes) {
                if (c == '"') {
                    if (pos + 1 < text.size() && text[pos + 1] == '"') {
                        field.push_back('"');
                        pos += 2;
                    } else {
                        in_quotes = false;
                        ++pos;
                    }
                } else {
                    if (c == '\n') ++line;
                    field.push_back(c);
                    ++pos;
                }
                continue;
            }
            switch (c) {
                case '"':
                    in_quotes = true;
                    ++pos;
                    break;
                case ',':
                    fields.push_back(std::move(field));
                    field.clear();
                    ++pos;
                    break;
                case '\r':
                    ++pos;
                    break;
                case '\n':
                    fields.push_back(std::move(field));
                    ++pos;
                    ++line;
                    return true;
                default:
                    field.push_back(c);
                    ++pos;
            }
        }
    }
};

std::string trim(std::string s) {
    size_t a = s.find_first_not_of(" \t");
    size_t b = s.find_last_not_of(" \t");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

}  // namespace

Table::Table(std::vector<std::string> header, std::vector<Row> rows,
             std::string path)
    : header_(std::move(header)), rows_(std::move(rows)), path_(std::move(path)) {}

bool Table::has_column(std::string_view name) const {
    for (const auto& h : header_)
        if (h == name) return true;
    return false;
}

int Table::column(std::string_view name) const {
    for (size_t i = 0; i < header_.size(); ++i)
        if (header_[i] == name) return static_cast<int>(i);
    throw ValidationError(path_ + ": missing required column '" +
                          std::string(name) + "'");
}

const std::string& Table::field(const Row& row, int col) const {
    return row.fields.at(static_cast<size_t>(col));
}

double Table::number(const Row& row, int col) const {
    const std::string& s = field(row, col);
    if (s.empty()) fail(row, "column '" + header_[col] + "' is empty");
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) {
        fail(row, "column '" + header_[col] + "' is not a number: '" + s + "'");
    }
    return v;
}

std::optional<double> Table::number_optional(const Row& row, int col) const {
    if (field(row, col).empty()) return std::nullopt;
    return number(row, col);
}

long Table::integer(const Row& row, int col) const {
    const std::string& s = field(row, col);
    long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
        fail(row, "column '" + header_[col] + "' is not an integer: '" + s + "'");
    }
    return v;
}

void Table::fail(const Row& row, const std::string& msg) const {
    throw ValidationError(path_ + ":" + std::to_string(row.line) + ": " + msg);
}

Table parse(std::string_view text, std::string path) {
    Parser p{text, path};
    std::vector<std::string> fields;
    int line = 0;
    if (!p.next_record(fields, line)) {
        throw ValidationError(path + ": empty file (header expected)");
    }
    std::vector<std::string> header;
    header.reserve(fields.size());
    for (auto& f : fields) header.push_back(trim(std::move(f)));

    std::vector<Row> rows;
    while (p.next_record(fields, line)) {
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (fields.size() != header.size()) {
            throw ValidationError(path + ":" + std::to_string(line) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
        }
        Row r;
        r.line = line;
        r.fields.reserve(fields.size());
        for (auto& f : fields) r.fields.push_back(trim(std::move(f)));
        rows.push_back(std::move(r));
    }
    return Table(std::move(header), std::move(rows), std::move(path));
}

Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    return parse(text, path);
}

std::string escape(std::string_view field) {
    bool needs = field.find_first_of(",\"\n\r") != std::string_view::npos;
    if (!needs) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

Writer::Writer(std::vector<std::string> header) : header_(std::move(header)) {}

void Writer::add_row(std::vector<std::string> fields) {
    if (fields.size() != header_.size()) {
        throw ValidationError("csv writer: row width " + std::to_string(fields.size()) +
                              " does not match header width " +
                              std::to_string(header_.size()));
    }
    rows_.push_back(std::move(fields));
}

std::string Writer::to_string() const {
    std::string out;
    auto emit = [&](const std::vector<std::string>& fields) {
        for (size_t i = 0; i < fields.size(); ++i) {
            if (i) out.push_back(',');
            out += escape(fields[i]);
        }
        out.push_back('\n');
    };
    emit(header_);
    for (const auto& r : rows_) emit(r);
    return out;
}

void Writer::write_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write file: " + path);
    out << to_string();
    if (!out) throw ValidationError("write failed: " + path);
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string file_content_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file for hashing: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(text)));
    return buf;
}

}  // namespace epiflow::csv
