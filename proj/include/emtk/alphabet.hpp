#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace emtk {

// Residue alphabet with stable letter indices:
//   DNA:     A=0 C=1 G=2 T=3
//   Protein: the 20 standard amino acids in alphabetical one-letter order,
//            A=0 C=1 D=2 E=3 F=4 G=5 H=6 I=7 K=8 L=9 M=10 N=11 P=12 Q=13
//            R=14 S=15 T=16 V=17 W=18 Y=19
class Alphabet {
  public:
    enum class Kind { Dna, Protein };

    static Alphabet dna() { return Alphabet(Kind::Dna, "ACGT"); }
    static Alphabet protein() { return Alphabet(Kind::Protein, "ACDEFGHIKLMNPQRSTVWY"); }

    Kind kind() const { return kind_; }
    std::size_t size() const { return letters_.size(); }
    const std::string& letters() const { return letters_; }

    char letter(std::size_t index) const { return letters_.at(index); }

    // -1 when `c` (after uppercasing) is not in the alphabet
    int index_of(char c) const {
        unsigned char u = static_cast<unsigned char>(c);
        if (u >= 'a' && u <= 'z') u = static_cast<unsigned char>(u - 'a' + 'A');
        return lookup_[u];
    }

    bool contains(char c) const { return index_of(c) >= 0; }

    bool operator==(const Alphabet& other) const { return kind_ == other.kind_; }

  private:
    Alphabet(Kind kind, std::string_view letters) : kind_(kind), letters_(letters) {
        lookup_.fill(-1);
        for (std::size_t i = 0; i < letters_.size(); ++i)
            lookup_[static_cast<unsigned char>(letters_[i])] = static_cast<int>(i);
    }

    Kind kind_;
    std::string letters_;
    std::array<int, 256> lookup_{};
};

inline std::string to_string(Alphabet::Kind kind) {
    return kind == Alphabet::Kind::Dna ? "dna" : "protein";
}

inline Alphabet alphabet_from_name(const std::string& name) {
    if (name == "dna") return Alphabet::dna();
    if (name == "protein") return Alphabet::protein();
    throw std::invalid_argument("unknown alphabet '" + name + "' (expected dna or protein)");
}

}  // namespace emtk
