// Newick tree parsing. Nodes are stored in post order (children before
// parents, root last) so likelihood recursions can run as a flat pass.
#pragma once

#include <cctype>
#include <cstddef>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace emtk {

struct PhyloTree {
    struct Node {
        std::string name;            // required for leaves
        double branch = 0.1;         // length of the edge to the parent
        bool has_branch = false;     // whether the input specified it
        std::vector<int> children;   // empty for leaves
        int parent = -1;
    };

    std::vector<Node> nodes;  // post order, root last

    int root() const { return int(nodes.size()) - 1; }
    bool is_leaf(int i) const { return nodes[i].children.empty(); }

    std::vector<int> leaf_indices() const {
        std::vector<int> out;
        for (int i = 0; i < int(nodes.size()); ++i)
            if (is_leaf(i)) out.push_back(i);
        return out;
    }

    std::size_t leaf_count() const { return leaf_indices().size(); }

    void validate_binary() const {
        if (nodes.empty()) throw std::invalid_argument("tree has no nodes");
        for (const auto& n : nodes)
            if (!n.children.empty() && n.children.size() != 2) {
                std::ostringstream os;
                os << "tree is not binary: internal node"
                   << (n.name.empty() ? "" : " '" + n.name + "'") << " has " << n.children.size()
                   << " children";
                throw std::invalid_argument(os.str());
            }
    }
};

class NewickError : public std::runtime_error {
  public:
    NewickError(const std::string& what, std::size_t pos)
        : std::runtime_error("newick position " + std::to_string(pos + 1) + ": " + what),
          pos_(pos) {}
    std::size_t position() const { return pos_; }

  private:
    std::size_t pos_;
};

namespace detail {

class NewickParser {
  public:
    explicit NewickParser(const std::string& text) : text_(text) {}

    PhyloTree parse() {
        PhyloTree tree;
        skip_space();
        parse_subtree(tree);
        skip_space();
        if (pos_ >= text_.size() || text_[pos_] != ';')
            throw NewickError("expected ';' after tree", pos_);
        ++pos_;
        skip_space();
        if (pos_ != text_.size()) throw NewickError("trailing characters after ';'", pos_);

        std::set<std::string> seen;
        for (const auto& n : tree.nodes)
            if (n.children.empty()) {
                if (n.name.empty()) throw NewickError("unnamed leaf", 0);
                if (!seen.insert(n.name).second)
                    throw NewickError("duplicate leaf name '" + n.name + "'", 0);
            }
        return tree;
    }

  private:
    int parse_subtree(PhyloTree& tree) {
        skip_space();
        if (pos_ >= text_.size()) throw NewickError("unexpected end of input", pos_);
        PhyloTree::Node node;
        std::vector<int> children;
        if (text_[pos_] == '(') {
            ++pos_;
            children.push_back(parse_subtree(tree));
            skip_space();
            while (pos_ < text_.size() && text_[pos_] == ',') {
                ++pos_;
                children.push_back(parse_subtree(tree));
                skip_space();
            }
            if (pos_ >= text_.size() || text_[pos_] != ')')
                throw NewickError("expected ')' or ','", pos_);
            ++pos_;
        }
        node.name = parse_name();
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == ':') {
            ++pos_;
            node.branch = parse_number();
            node.has_branch = true;
        }
        if (children.empty() && node.name.empty())
            throw NewickError("leaf without a name", pos_);
        node.children = children;
        tree.nodes.push_back(std::move(node));
        const int self = int(tree.nodes.size()) - 1;
        for (int c : children) tree.nodes[c].parent = self;
        return self;
    }

    std::string parse_name() {
        skip_space();
        std::string name;
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-') {
                name.push_back(c);
                ++pos_;
            } else {
                break;
            }
        }
        return name;
    }

    double parse_number() {
        skip_space();
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
                text_[pos_] == 'e' || text_[pos_] == 'E' || text_[pos_] == '+' ||
                text_[pos_] == '-'))
            ++pos_;
        if (pos_ == start) throw NewickError("expected a branch length", pos_);
        try {
            std::size_t used = 0;
            const double v = std::stod(text_.substr(start, pos_ - start), &used);
            if (used != pos_ - start) throw std::invalid_argument("");
            if (v < 0.0) throw NewickError("negative branch length", start);
            return v;
        } catch (const NewickError&) {
            throw;
        } catch (const std::exception&) {
            throw NewickError("malformed branch length '" + text_.substr(start, pos_ - start) + "'",
                              start);
        }
    }

    void skip_space() {
        while (pos_ < text_.size() &&
               std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }

    const std::string& text_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline PhyloTree parse_newick(const std::string& text) {
    return detail::NewickParser(text).parse();
}

inline std::string write_newick(const PhyloTree& tree) {
    std::string out;
    auto emit = [&](auto&& self, int i) -> void {
        const auto& n = tree.nodes[i];
        if (!n.children.empty()) {
            out.push_back('(');
            for (std::size_t c = 0; c < n.children.size(); ++c) {
                if (c > 0) out.push_back(',');
                self(self, n.children[c]);
            }
            out.push_back(')');
        }
        out += n.name;
        if (i != tree.root()) {
            std::ostringstream os;
            os << ':' << n.branch;
            out += os.str();
        }
    };
    emit(emit, tree.root());
    out.push_back(';');
    return out;
}

}  // namespace emtk
