#include "maea/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <sstream>

namespace maea {

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_matrix_csv(const std::string& path, const Mat& a) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      if (j) out << ",";
      out << format_g17(a(i, j));
    }
    out << "\n";
  }
}

namespace {

void emit_vector(std::ostringstream& os, const Vec& v) {
  for (int i = 0; i < v.size(); ++i) {
    if (i) os << " ";
    os << format_g17(v(i));
  }
}

void emit_space_block(std::ostringstream& os, const KnowledgeSpace& s, int which) {
  os << "features" << which << " " << s.dictionary_size() << "\n";
  for (const auto& f : s.features) {
    switch (f.kind) {
      case FeatureKind::monomial:
        os << "monomial " << f.degree << "\n";
        break;
      case FeatureKind::gaussian: {
        os << "gaussian";
        for (int i = 0; i < f.center.size(); ++i) os << " " << format_g17(f.center(i));
        os << " " << format_g17(f.width) << "\n";
        break;
      }
      case FeatureKind::sinusoid:
        os << "sinusoid " << format_g17(f.frequency) << " " << format_g17(f.phase) << "\n";
        break;
    }
  }
  os << "basis" << which << " " << s.basis_size() << "\n";
  for (const auto& p : s.basis_points) {
    std::ostringstream line;
    emit_vector(line, p);
    os << line.str() << "\n";
  }
  os << "jitter" << which << " " << format_g17(s.jitter) << "\n";
}

void emit_header(std::ostringstream& os, const char* space_name, const DomainBox& dom,
                 double scale) {
  os << "maea-model 1\n";
  os << "space " << space_name << "\n";
  os << "dim " << dom.dim() << "\n";
  os << "lower";
  for (int i = 0; i < dom.dim(); ++i) os << " " << format_g17(dom.lower(i));
  os << "\nupper";
  for (int i = 0; i < dom.dim(); ++i) os << " " << format_g17(dom.upper(i));
  os << "\nkernel_scale " << format_g17(scale) << "\n";
}

void emit_coefficients(std::ostringstream& os, const RkhsFunction& f) {
  os << "coefficients " << f.coefficients.size() << "\n";
  for (int i = 0; i < f.coefficients.size(); ++i)
    os << format_g17(f.coefficients(i)) << "\n";
}

}  // namespace

std::string model_to_text(const KnowledgeSpace& space, const RkhsFunction& f) {
  if (f.tag != space.tag()) throw std::invalid_argument("model tag mismatch");
  std::ostringstream os;
  emit_header(os, space.agent_id == 1 ? "agent1" : "agent2", space.domain, space.scale);
  emit_space_block(os, space, space.agent_id);
  emit_coefficients(os, f);
  return os.str();
}

std::string model_to_text(const FusionSpace& fusion, const RkhsFunction& f) {
  if (f.tag != SpaceTag::fusion) throw std::invalid_argument("model tag mismatch");
  std::ostringstream os;
  emit_header(os, "fusion", fusion.space1.domain, fusion.kernel_scale);
  emit_space_block(os, fusion.space1, 1);
  emit_space_block(os, fusion.space2, 2);
  emit_coefficients(os, f);
  return os.str();
}

namespace {

struct Cursor {
  std::istringstream in;
  int line_no = 0;
  explicit Cursor(const std::string& text) : in(text) {}

  std::string next_line() {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("model file truncated");
    ++line_no;
    return line;
  }
};

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

double parse_double(const std::string& s) {
  size_t pos = 0;
  double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::runtime_error("malformed number: " + s);
  return v;
}

void expect_key(const std::vector<std::string>& toks, const std::string& key, int line_no) {
  if (toks.empty() || toks[0] != key)
    throw std::runtime_error("model file line " + std::to_string(line_no) + ": expected '" +
                             key + "'");
}

KnowledgeSpace parse_space_block(Cursor& cur, int which, const DomainBox& dom, double scale) {
  KnowledgeSpace s;
  s.agent_id = which;
  s.domain = dom;
  s.scale = scale;
  auto toks = split_ws(cur.next_line());
  expect_key(toks, "features" + std::to_string(which), cur.line_no);
  int nf = std::stoi(toks.at(1));
  for (int i = 0; i < nf; ++i) {
    auto ft = split_ws(cur.next_line());
    if (ft.empty()) throw std::runtime_error("empty feature line");
    if (ft[0] == "monomial") {
      s.features.push_back(FeatureDescriptor::make_monomial(std::stoi(ft.at(1))));
    } else if (ft[0] == "gaussian") {
      int d = static_cast<int>(ft.size()) - 2;
      Vec c(d);
      for (int k = 0; k < d; ++k) c(k) = parse_double(ft.at(1 + k));
      s.features.push_back(FeatureDescriptor::make_gaussian(c, parse_double(ft.back())));
    } else if (ft[0] == "sinusoid") {
      s.features.push_back(
          FeatureDescriptor::make_sinusoid(parse_double(ft.at(1)), parse_double(ft.at(2))));
    } else {
      throw std::runtime_error("model file line " + std::to_string(cur.line_no) +
                               ": unknown feature kind '" + ft[0] + "'");
    }
  }
  toks = split_ws(cur.next_line());
  expect_key(toks, "basis" + std::to_string(which), cur.line_no);
  int np = std::stoi(toks.at(1));
  std::vector<Vec> pts;
  for (int i = 0; i < np; ++i) {
    auto pt = split_ws(cur.next_line());
    Vec p(pt.size());
    for (size_t k = 0; k < pt.size(); ++k) p(k) = parse_double(pt[k]);
    pts.push_back(p);
  }
  toks = split_ws(cur.next_line());
  expect_key(toks, "jitter" + std::to_string(which), cur.line_no);
  double jitter = parse_double(toks.at(1));
  if (!pts.empty()) assign_basis_points(s, pts);
  s.jitter = jitter;
  return s;
}

}  // namespace

ParsedModel model_from_text(const std::string& text) {
  Cursor cur(text);
  auto toks = split_ws(cur.next_line());
  expect_key(toks, "maea-model", cur.line_no);
  toks = split_ws(cur.next_line());
  expect_key(toks, "space", cur.line_no);
  std::string kind = toks.at(1);
  toks = split_ws(cur.next_line());
  expect_key(toks, "dim", cur.line_no);
  int dim = std::stoi(toks.at(1));
  toks = split_ws(cur.next_line());
  expect_key(toks, "lower", cur.line_no);
  Vec lo(dim), hi(dim);
  for (int i = 0; i < dim; ++i) lo(i) = parse_double(toks.at(1 + i));
  toks = split_ws(cur.next_line());
  expect_key(toks, "upper", cur.line_no);
  for (int i = 0; i < dim; ++i) hi(i) = parse_double(toks.at(1 + i));
  DomainBox dom(lo, hi);
  toks = split_ws(cur.next_line());
  expect_key(toks, "kernel_scale", cur.line_no);
  double scale = parse_double(toks.at(1));

  ParsedModel out;
  out.kernel_scale = scale;
  if (kind == "agent1" || kind == "agent2") {
    int which = kind == "agent1" ? 1 : 2;
    out.tag = which == 1 ? SpaceTag::agent1 : SpaceTag::agent2;
    out.space1 = parse_space_block(cur, which, dom, scale);
  } else if (kind == "fusion") {
    out.tag = SpaceTag::fusion;
    out.space1 = parse_space_block(cur, 1, dom, scale);
    out.space2 = parse_space_block(cur, 2, dom, scale);
  } else {
    throw std::runtime_error("unknown space kind '" + kind + "'");
  }
  toks = split_ws(cur.next_line());
  expect_key(toks, "coefficients", cur.line_no);
  int n = std::stoi(toks.at(1));
  out.function.tag = out.tag;
  out.function.coefficients.resize(n);
  for (int i = 0; i < n; ++i)
    out.function.coefficients(i) = parse_double(split_ws(cur.next_line()).at(0));
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace maea
