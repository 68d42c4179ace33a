#include "recvae/ablation.hpp"

#include <cstdio>
#include <sstream>

#include "recvae/errors.hpp"

namespace recvae {

ResolvedAblation configure_ablation(const AblationFlags& flags, const HyperParams& hyper,
                                    double fixed_beta) {
  ResolvedAblation r;
  r.arch = flags.new_architecture ? EncoderArch::dense_swish : EncoderArch::single_tanh;
  r.prior_weights = flags.composite_prior ? hyper.prior_weights : std::array<double, 3>{1, 0, 0};
  r.kl.rescale = flags.beta_rescaling;
  r.kl.gamma = hyper.gamma;
  r.kl.fixed_beta = fixed_beta;
  r.joint_updates = !flags.alternating_training;
  r.decoder_clean_input = flags.decoder_without_denoising;
  return r;
}

std::vector<AblationFlags> ablation_table_rows() {
  // {arch, prior, rescale, alternating, decoder w/o denoising}
  return {
      {false, false, false, false, false},
      {true, false, false, false, false},
      {true, true, false, false, false},
      {true, false, true, false, false},
      {true, false, false, true, true},
      {true, true, true, false, false},
      {false, true, true, true, true},
      {true, false, true, true, true},
      {true, true, false, true, true},
      {true, true, true, true, false},
      {true, true, true, true, true},
  };
}

std::string format_ablation_table(const std::vector<AblationFlags>& rows,
                                  const std::vector<double>& ndcg) {
  if (rows.size() != ndcg.size())
    throw ShapeError("format_ablation_table: rows and scores differ in length");
  std::ostringstream out;
  out << "arch\tprior\trescale\talt\tdec_clean\tndcg@100\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& f = rows[i];
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%d\t%d\t%d\t%d\t%d\t%.6f\n", f.new_architecture ? 1 : 0,
                  f.composite_prior ? 1 : 0, f.beta_rescaling ? 1 : 0,
                  f.alternating_training ? 1 : 0, f.decoder_without_denoising ? 1 : 0, ndcg[i]);
    out << buf;
  }
  return out.str();
}

std::vector<std::pair<AblationFlags, double>> parse_ablation_table(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::pair<AblationFlags, double>> out;
  bool header = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    int a, p, r, t, d;
    double score;
    if (std::sscanf(line.c_str(), "%d\t%d\t%d\t%d\t%d\t%lf", &a, &p, &r, &t, &d, &score) != 6)
      throw ParseError("bad ablation table row", line_no);
    AblationFlags f{a != 0, p != 0, r != 0, t != 0, d != 0};
    out.emplace_back(f, score);
  }
  return out;
}

}  // namespace recvae
