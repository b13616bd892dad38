#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace epiflow::csv {

// One parsed data row. line is 1-based and counts physical lines in the
// file (the header is line 1), so error messages point at the source.
struct Row {
    std::vector<std::string> fields;
    int line = 0;
};

class Table {
public:
    Table(std::vector<std::string> header, std::vector<Row> rows,
          std::string path);

    const std::vector<std::string>& header() const { return header_; }
    const std::vector<Row>& rows() const { return rows_; }
    const std::string& path() const { return path_; }

    bool has_column(std::string_view name) const;
    // Index of a required column; throws ValidationError when absent.
    int column(std::string_view name) const;

    const std::string& field(const Row& row, int col) const;

    // Strict conversions. Empty cells are only legal through the
    // *_optional variants; anything non-numeric is an error with the
    // file name and line number.
    double number(const Row& row, int col) const;
    std::optional<double> number_optional(const Row& row, int col) const;
    long integer(const Row& row, int col) const;

    [[noreturn]] void fail(const Row& row, const std::string& msg) const;

private:
    std::vector<std::string> header_;
    std::vector<Row> rows_;
    std::string path_;
};

// Reads a whole CSV file. Requires a header row; every data row must have
// exactly as many fields as the header. Handles RFC-4180 quoting and CRLF.
Table read_file(const std::string& path);

// Parses CSV text (used by tests).
Table parse(std::string_view text, std::string path = "<memory>");

std::string escape(std::string_view field);

class Writer {
public:
    explicit Writer(std::vector<std::string> header);

    void add_row(std::vector<std::string> fields);
    const std::vector<std::vector<std::string>>& rows() const { return rows_; }
    const std::vector<std::string>& header() const { return header_; }

    std::string to_string() const;
    void write_file(const std::string& path) const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

// FNV-1a over a file's bytes, as a 16-hex-digit string. Used for
// provenance records and stage cache keys.
std::string file_content_hash(const std::string& path);
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 14695981039346656037ull);

}  // namespace epiflow::csv
