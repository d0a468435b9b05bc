// Data ingestion and emission: FASTA sequences, aligned FASTA, and
// genotype tables. Parsers reject anything outside their grammar with a
// located error rather than guessing.
#pragma once

#include <cctype>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "emtk/alphabet.hpp"

namespace emtk {

// Parse failure with a 1-based line (and column where it makes sense).
class ParseError : public std::runtime_error {
  public:
    ParseError(std::string what, std::size_t line, std::size_t column = 0)
        : std::runtime_error(format(what, line, column)), line_(line), column_(column) {}

    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

  private:
    static std::string format(const std::string& what, std::size_t line, std::size_t column) {
        std::ostringstream os;
        os << "line " << line;
        if (column > 0) os << ", column " << column;
        os << ": " << what;
        return os.str();
    }
    std::size_t line_;
    std::size_t column_;
};

struct Sequence {
    std::string id;
    std::vector<std::uint8_t> residues;  // alphabet indices

    std::size_t length() const { return residues.size(); }

    std::string to_string(const Alphabet& alphabet) const {
        std::string s;
        s.reserve(residues.size());
        for (auto r : residues) s.push_back(alphabet.letter(r));
        return s;
    }
};

// Rectangular alignment; gap cells hold Alignment::gap.
struct Alignment {
    static constexpr std::uint8_t gap = 0xFF;

    std::vector<std::string> ids;
    std::vector<std::vector<std::uint8_t>> rows;  // ids.size() x width

    std::size_t depth() const { return rows.size(); }
    std::size_t width() const { return rows.empty() ? 0 : rows.front().size(); }

    // row with gaps removed, as a plain sequence
    Sequence degapped(std::size_t i, const Alphabet&) const {
        Sequence s;
        s.id = ids[i];
        for (auto c : rows[i])
            if (c != gap) s.residues.push_back(c);
        return s;
    }

    bool operator==(const Alignment&) const = default;
};

// Unordered biallelic genotype: number of copies of allele 1 (0, 1 or 2).
struct GenotypeTable {
    std::vector<std::string> ids;
    std::vector<std::vector<std::uint8_t>> dosages;       // ids.size() x loci
    std::vector<std::pair<char, char>> locus_alleles;     // letter for allele 0 / allele 1

    std::size_t individuals() const { return ids.size(); }
    std::size_t loci() const { return locus_alleles.size(); }
};

namespace detail {

inline void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline std::vector<std::string> split_fields(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

struct RawRecord {
    std::string id;
    std::string body;
    std::size_t header_line;
    std::vector<std::size_t> body_lines;   // source line per body character
    std::vector<std::size_t> body_columns;
};

// Shared FASTA record scanner: collects bodies with per-character source
// locations so residue errors can name line and column.
inline std::vector<RawRecord> scan_fasta(std::istream& in) {
    std::vector<RawRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (line.empty()) continue;
        if (line[0] == '>') {
            std::string id = line.substr(1);
            while (!id.empty() && (id.back() == ' ' || id.back() == '\t')) id.pop_back();
            while (!id.empty() && (id.front() == ' ' || id.front() == '\t')) id.erase(id.begin());
            if (id.empty()) throw ParseError("empty FASTA header", lineno);
            records.push_back(RawRecord{std::move(id), {}, lineno, {}, {}});
        } else {
            if (records.empty()) throw ParseError("sequence data before first FASTA header", lineno);
            for (std::size_t col = 0; col < line.size(); ++col) {
                const char c = line[col];
                if (c == ' ' || c == '\t') continue;
                records.back().body.push_back(c);
                records.back().body_lines.push_back(lineno);
                records.back().body_columns.push_back(col + 1);
            }
        }
    }
    for (const auto& rec : records)
        if (rec.body.empty())
            throw ParseError("empty FASTA record '" + rec.id + "'", rec.header_line);
    return records;
}

}  // namespace detail

// Plain FASTA. Whitespace inside bodies is ignored, lowercase residues are
// uppercased, anything outside the alphabet is an error.
inline std::vector<Sequence> parse_fasta(std::istream& in, const Alphabet& alphabet) {
    std::vector<Sequence> out;
    for (auto& rec : detail::scan_fasta(in)) {
        Sequence s;
        s.id = rec.id;
        s.residues.reserve(rec.body.size());
        for (std::size_t i = 0; i < rec.body.size(); ++i) {
            const int idx = alphabet.index_of(rec.body[i]);
            if (idx < 0)
                throw ParseError(std::string("residue '") + rec.body[i] + "' not in " +
                                     to_string(alphabet.kind()) + " alphabet",
                                 rec.body_lines[i], rec.body_columns[i]);
            s.residues.push_back(static_cast<std::uint8_t>(idx));
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<Sequence> parse_fasta(const std::string& text, const Alphabet& alphabet) {
    std::istringstream in(text);
    return parse_fasta(in, alphabet);
}

// Aligned FASTA: '-' is the gap, '.' is accepted as '-'. All records must
// have equal length and no column may be entirely gaps.
inline Alignment parse_alignment(std::istream& in, const Alphabet& alphabet) {
    Alignment aln;
    auto records = detail::scan_fasta(in);
    for (auto& rec : records) {
        std::vector<std::uint8_t> row;
        row.reserve(rec.body.size());
        for (std::size_t i = 0; i < rec.body.size(); ++i) {
            const char c = rec.body[i];
            if (c == '-' || c == '.') {
                row.push_back(Alignment::gap);
                continue;
            }
            const int idx = alphabet.index_of(c);
            if (idx < 0)
                throw ParseError(std::string("residue '") + c + "' not in " +
                                     to_string(alphabet.kind()) + " alphabet",
                                 rec.body_lines[i], rec.body_columns[i]);
            row.push_back(static_cast<std::uint8_t>(idx));
        }
        aln.ids.push_back(rec.id);
        aln.rows.push_back(std::move(row));
    }
    for (std::size_t i = 1; i < aln.rows.size(); ++i) {
        if (aln.rows[i].size() != aln.rows[0].size()) {
            std::ostringstream os;
            os << "ragged alignment: '" << aln.ids[0] << "' has length " << aln.rows[0].size()
               << " but '" << aln.ids[i] << "' has length " << aln.rows[i].size();
            throw ParseError(os.str(), records[i].header_line);
        }
    }
    for (std::size_t col = 0; col < aln.width(); ++col) {
        bool any = false;
        for (std::size_t i = 0; i < aln.depth(); ++i) any = any || aln.rows[i][col] != Alignment::gap;
        if (!any) {
            std::ostringstream os;
            os << "alignment column " << col + 1 << " contains only gaps";
            throw ParseError(os.str(), records.empty() ? 1 : records[0].header_line);
        }
    }
    return aln;
}

inline Alignment parse_alignment(const std::string& text, const Alphabet& alphabet) {
    std::istringstream in(text);
    return parse_alignment(in, alphabet);
}

inline void write_alignment(const Alignment& aln, const Alphabet& alphabet, std::ostream& out) {
    for (std::size_t i = 0; i < aln.depth(); ++i) {
        out << '>' << aln.ids[i] << '\n';
        std::string row;
        row.reserve(aln.width());
        for (auto c : aln.rows[i]) row.push_back(c == Alignment::gap ? '-' : alphabet.letter(c));
        out << row << '\n';
    }
}

inline std::string write_alignment(const Alignment& aln, const Alphabet& alphabet) {
    std::ostringstream os;
    write_alignment(aln, alphabet, os);
    return os.str();
}

inline void write_fasta(const std::vector<Sequence>& seqs, const Alphabet& alphabet,
                        std::ostream& out) {
    for (const auto& s : seqs) out << '>' << s.id << '\n' << s.to_string(alphabet) << '\n';
}

// Genotype TSV: one row per individual, first field the id, then one field
// per locus. Fields are either allele pairs like "A/G" or dosage codes
// "0"/"1"/"2" counting copies of allele 1. Allele letters per locus come
// from the pair fields; allele 0 is the lexicographically smaller letter.
// Loci described only by dosage codes get the placeholder letters '0','1'.
inline GenotypeTable parse_genotypes(std::istream& in) {
    struct RawField {
        bool coded;
        char a, b;        // letters when !coded
        std::uint8_t code;
    };
    std::vector<std::string> ids;
    std::vector<std::vector<RawField>> raw;
    std::string line;
    std::size_t lineno = 0;
    std::size_t loci = 0;
    while (std::getline(in, line)) {
        ++lineno;
        detail::strip_cr(line);
        if (line.empty()) continue;
        auto fields = detail::split_fields(line, '\t');
        if (fields.size() < 2)
            throw ParseError("genotype row needs an id and at least one locus", lineno);
        if (ids.empty()) {
            loci = fields.size() - 1;
        } else if (fields.size() - 1 != loci) {
            std::ostringstream os;
            os << "individual '" << fields[0] << "' has " << fields.size() - 1
               << " loci, expected " << loci;
            throw ParseError(os.str(), lineno);
        }
        std::vector<RawField> row;
        for (std::size_t j = 1; j < fields.size(); ++j) {
            const std::string& f = fields[j];
            if (f.size() == 1 && f[0] >= '0' && f[0] <= '2') {
                row.push_back(RawField{true, 0, 0, static_cast<std::uint8_t>(f[0] - '0')});
            } else if (f.size() == 3 && f[1] == '/') {
                char a = static_cast<char>(std::toupper(static_cast<unsigned char>(f[0])));
                char b = static_cast<char>(std::toupper(static_cast<unsigned char>(f[2])));
                row.push_back(RawField{false, a, b, 0});
            } else {
                throw ParseError("malformed genotype field '" + f + "' (expected X/Y or 0/1/2)",
                                 lineno);
            }
        }
        ids.push_back(fields[0]);
        raw.push_back(std::move(row));
    }

    GenotypeTable table;
    table.ids = std::move(ids);
    table.locus_alleles.resize(loci);
    // first pass: collect allele letters per locus, enforce biallelic
    std::vector<std::set<char>> seen(loci);
    for (std::size_t i = 0; i < raw.size(); ++i)
        for (std::size_t j = 0; j < loci; ++j)
            if (!raw[i][j].coded) {
                seen[j].insert(raw[i][j].a);
                seen[j].insert(raw[i][j].b);
                if (seen[j].size() > 2) {
                    std::ostringstream os;
                    os << "locus " << j + 1 << " has more than two alleles (";
                    bool first = true;
                    for (char c : seen[j]) {
                        if (!first) os << ", ";
                        os << c;
                        first = false;
                    }
                    os << ")";
                    throw ParseError(os.str(), 1);
                }
            }
    for (std::size_t j = 0; j < loci; ++j) {
        if (seen[j].empty()) {
            table.locus_alleles[j] = {'0', '1'};
        } else if (seen[j].size() == 1) {
            table.locus_alleles[j] = {*seen[j].begin(), *seen[j].begin()};
        } else {
            auto it = seen[j].begin();
            const char a = *it++;
            table.locus_alleles[j] = {a, *it};
        }
    }
    // second pass: normalize everything to dosages
    for (std::size_t i = 0; i < raw.size(); ++i) {
        std::vector<std::uint8_t> row(loci);
        for (std::size_t j = 0; j < loci; ++j) {
            const RawField& f = raw[i][j];
            if (f.coded) {
                if (f.code > 0 && table.locus_alleles[j].first == table.locus_alleles[j].second &&
                    table.locus_alleles[j].first != '0') {
                    std::ostringstream os;
                    os << "locus " << j + 1 << ": dosage code " << int(f.code)
                       << " but only one allele letter ('" << table.locus_alleles[j].first
                       << "') is known";
                    throw ParseError(os.str(), 1);
                }
                row[j] = f.code;
            } else {
                auto dose = [&](char c) -> std::uint8_t {
                    return c == table.locus_alleles[j].second &&
                                   table.locus_alleles[j].first != table.locus_alleles[j].second
                               ? 1
                               : 0;
                };
                row[j] = static_cast<std::uint8_t>(dose(f.a) + dose(f.b));
            }
        }
        table.dosages.push_back(std::move(row));
    }
    return table;
}

inline GenotypeTable parse_genotypes(const std::string& text) {
    std::istringstream in(text);
    return parse_genotypes(in);
}

inline void write_genotypes(const GenotypeTable& table, std::ostream& out) {
    for (std::size_t i = 0; i < table.individuals(); ++i) {
        out << table.ids[i];
        for (std::size_t j = 0; j < table.loci(); ++j) {
            const auto [a0, a1] = table.locus_alleles[j];
            const std::uint8_t d = table.dosages[i][j];
            out << '\t' << (d == 2 ? a1 : a0) << '/' << (d >= 1 ? a1 : a0);
        }
        out << '\n';
    }
}

}  // namespace emtk
