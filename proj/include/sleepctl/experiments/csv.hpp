#pragma once

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace sleepctl {

/// One CSV cell: text, an integer or a double (17 significant digits).
using CsvField = std::variant<std::string, long long, double>;

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add(std::vector<CsvField> row) {
        if (row.size() != header_.size())
            throw std::invalid_argument("CSV row has " + std::to_string(row.size()) + " fields, header has " +
                                        std::to_string(header_.size()));
        rows_.push_back(std::move(row));
    }

    const std::vector<std::string>& header() const noexcept { return header_; }
    std::size_t size() const noexcept { return rows_.size(); }

    std::string str() const {
        std::ostringstream os;
        write_row(os, header_);
        for (const auto& r : rows_) {
            std::vector<std::string> cells;
            for (const auto& f : r)
                cells.push_back(format(f));
            write_row(os, cells);
        }
        return os.str();
    }

    static std::string format(const CsvField& f) {
        if (const auto* s = std::get_if<std::string>(&f))
            return *s;
        if (const auto* i = std::get_if<long long>(&f))
            return std::to_string(*i);
        std::ostringstream os;
        os << std::setprecision(std::numeric_limits<double>::max_digits10) << std::get<double>(f);
        return os.str();
    }

private:
    static void write_row(std::ostream& os, const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i)
                os << ',';
            const auto& c = cells[i];
            if (c.find_first_of(",\"\n\r") == std::string::npos) {
                os << c;
            } else {
                os << '"';
                for (char ch : c) {
                    if (ch == '"')
                        os << '"';
                    os << ch;
                }
                os << '"';
            }
        }
        os << '\n';
    }

    std::vector<std::string> header_;
    std::vector<std::vector<CsvField>> rows_;
};

/// Splits CSV text into rows of fields, honouring double-quoted fields.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += ch;
            }
            continue;
        }
        any = true;
        if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            row.push_back(field);
            field.clear();
        } else if (ch == '\n') {
            row.push_back(field);
            rows.push_back(row);
            row.clear();
            field.clear();
            any = false;
        } else if (ch != '\r') {
            field += ch;
        }
    }
    if (any) {
        row.push_back(field);
        rows.push_back(row);
    }
    return rows;
}

/// Writes to a temporary file next to `path` and renames it into place.
inline void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write " + tmp);
        out << content;
        if (!out)
            throw std::runtime_error("short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot move " + tmp + " to " + path);
}

} // namespace sleepctl
