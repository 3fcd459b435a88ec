#include "eoslab/checkpoint.hpp"

#include <sstream>
#include <stdexcept>

#include "eoslab/io.hpp"

namespace eoslab {

std::string checkpoint_text(const ModelParams& p, const ReceptiveFields& fields) {
  p.validate();
  fields.validate();
  if (p.m != fields.m)
    throw std::invalid_argument("checkpoint: params.m != fields.m");
  std::ostringstream out;
  out << "eoslab-checkpoint v1\n";
  out << "d " << fields.d << " m " << fields.m << " J " << fields.J() << "\n";
  out << "fields\n";
  for (const auto& s : fields.subsets) {
    for (std::size_t c = 0; c < s.size(); ++c) out << (c ? " " : "") << s[c];
    out << "\n";
  }
  out << "K " << p.K << "\n";
  out << "w\n";
  for (int k = 0; k < p.K; ++k) {
    for (int c = 0; c < p.m; ++c) out << (c ? " " : "") << fmt_hex(p.W(k, c));
    out << "\n";
  }
  out << "b\n";
  for (int k = 0; k < p.K; ++k) out << (k ? " " : "") << fmt_hex(p.b[k]);
  out << "\nv\n";
  for (int k = 0; k < p.K; ++k) out << (k ? " " : "") << fmt_hex(p.v[k]);
  out << "\nbeta\n" << fmt_hex(p.beta) << "\n";
  return out.str();
}

void save_checkpoint(const std::string& path, const ModelParams& p,
                     const ReceptiveFields& fields) {
  atomic_write_file(path, checkpoint_text(p, fields));
}

Checkpoint parse_checkpoint(const std::string& text) {
  TokenCursor cur(text, "checkpoint");
  cur.expect("eoslab-checkpoint");
  cur.expect("v1");
  Checkpoint ck;
  cur.expect("d");
  ck.fields.d = static_cast<int>(cur.integer("d"));
  cur.expect("m");
  ck.fields.m = static_cast<int>(cur.integer("m"));
  cur.expect("J");
  const int J = static_cast<int>(cur.integer("J"));
  if (J < 1) throw std::runtime_error("checkpoint: J must be >= 1");
  cur.expect("fields");
  ck.fields.subsets.assign(J, std::vector<int>(ck.fields.m));
  for (int j = 0; j < J; ++j)
    for (int c = 0; c < ck.fields.m; ++c)
      ck.fields.subsets[j][c] = static_cast<int>(cur.integer("field index"));
  cur.expect("K");
  const int K = static_cast<int>(cur.integer("K"));
  if (K < 0) throw std::runtime_error("checkpoint: K must be >= 0");
  ck.params.K = K;
  ck.params.m = ck.fields.m;
  ck.params.W.resize(K, ck.fields.m);
  ck.params.b.resize(K);
  ck.params.v.resize(K);
  cur.expect("w");
  for (int k = 0; k < K; ++k)
    for (int c = 0; c < ck.fields.m; ++c) ck.params.W(k, c) = cur.real("w entry");
  cur.expect("b");
  for (int k = 0; k < K; ++k) ck.params.b[k] = cur.real("b entry");
  cur.expect("v");
  for (int k = 0; k < K; ++k) ck.params.v[k] = cur.real("v entry");
  cur.expect("beta");
  ck.params.beta = cur.real("beta");
  cur.finish();
  try {
    ck.fields.validate();
    ck.params.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("checkpoint: invalid content: ") + e.what());
  }
  return ck;
}

Checkpoint load_checkpoint(const std::string& path) {
  return parse_checkpoint(read_file(path));
}

}  // namespace eoslab
