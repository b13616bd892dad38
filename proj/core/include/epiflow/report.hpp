#pragma once

#include <string>
#include <vector>

namespace epiflow::pipeline {

// A fully formatted table. Values are rounded exactly once, when the table
// is built; the CSV and markdown emitters render the same strings.
struct ReportTable {
    std::string name;  // file stem
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> fields);
};

// rates: one decimal place
std::string format_rate(double v);
// coefficients: three significant figures
std::string format_coef(double v);
std::string format_int(long v);
// generic fixed precision for diagnostics
std::string format_number(double v, int decimals = 4);

void write_table_csv(const ReportTable& table, const std::string& dir);
// One markdown document containing every table.
void write_tables_markdown(const std::vector<ReportTable>& tables,
                           const std::string& path);

struct ProvenanceRecord {
    std::string report;   // table name
    std::string row_key;  // "*" = whole table
    std::string column;   // "*" = every column
    std::string stage;
    std::string inputs;      // "path@hash;path@hash"
    std::string input_rows;  // e.g. "weekly_deaths.csv:4-29"
};

void write_provenance(const std::vector<ProvenanceRecord>& records,
                      const std::string& dir);

}  // namespace epiflow::pipeline
