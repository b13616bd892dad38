#include "epiflow/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "epiflow/csv.hpp"
#include "epiflow/errors.hpp"

namespace epiflow::pipeline {

namespace fs = std::filesystem;

void ReportTable::add_row(std::vector<std::string> fields) {
    if (fields.size() != columns.size()) {
        throw ValidationError("report table '" + name + "': row width " +
                              std::to_string(fields.size()) + " != " +
                              std::to_string(columns.size()));
    }
    rows.push_back(std::move(fields));
}

std::string format_rate(double v) {
    if (!std::isfinite(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    // avoid the "-0.0" artifact
    if (std::string_view(buf) == "-0.0") return "0.0";
    return buf;
}

std::string format_coef(double v) {
    if (!std::isfinite(v)) return "";
    if (v == 0.0) return "0.00";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

std::string format_int(long v) { return std::to_string(v); }

std::string format_number(double v, int decimals) {
    if (!std::isfinite(v)) return "";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

void write_table_csv(const ReportTable& table, const std::string& dir) {
    fs::create_directories(dir);
    csv::Writer w(table.columns);
    for (const auto& r : table.rows) w.add_row(r);
    w.write_file((fs::path(dir) / (table.name + ".csv")).string());
}

void write_tables_markdown(const std::vector<ReportTable>& tables,
                           const std::string& path) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write markdown report: " + path);
    for (const auto& t : tables) {
        out << "## " << t.name << "\n\n";
        out << "|";
        for (const auto& c : t.columns) out << " " << c << " |";
        out << "\n|";
        for (size_t i = 0; i < t.columns.size(); ++i) out << " --- |";
        out << "\n";
        for (const auto& r : t.rows) {
            out << "|";
            for (const auto& f : r) out << " " << (f.empty() ? " " : f) << " |";
            out << "\n";
        }
        out << "\n";
    }
}

void write_provenance(const std::vector<ProvenanceRecord>& records,
                      const std::string& dir) {
    fs::create_directories(dir);
    csv::Writer w({"report", "row_key", "column", "stage", "inputs", "input_rows"});
    for (const auto& r : records) {
        w.add_row({r.report, r.row_key, r.column, r.stage, r.inputs, r.input_rows});
    }
    w.write_file((fs::path(dir) / "provenance.csv").string());
}

}  // namespace epiflow::pipeline
