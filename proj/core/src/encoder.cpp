// Copyright 2026 The tailknn Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "tailknn/baselm.hpp"
#include "tailknn/rng.hpp"

namespace tailknn::baselm {

ContextEncoder::ContextEncoder(EncoderParams params, std::uint32_t vocab_size) : params_(params) {
  if (params_.dim == 0) throw std::invalid_argument("ContextEncoder: dim must be >= 1");
  if (params_.window == 0) throw std::invalid_argument("ContextEncoder: window must be >= 1");
  if (!(params_.decay > 0.0 && params_.decay < 1.0)) {
    throw std::invalid_argument(fmt::format("ContextEncoder: decay {} outside (0, 1)", params_.decay));
  }
  table_size_ = vocab_size;
  table_.resize(static_cast<std::size_t>(vocab_size) * params_.dim);
  for (TokenId t = 0; t < vocab_size; ++t) {
    token_vector_into(t, std::span<double>(table_).subspan(static_cast<std::size_t>(t) * params_.dim, params_.dim));
  }
}

void ContextEncoder::token_vector_into(TokenId token, std::span<double> out) const {
  const std::uint64_t base = mix_seed(params_.seed, token);
  double norm2 = 0.0;
  for (std::uint32_t j = 0; j < params_.dim; ++j) {
    // 53-bit uniform in [-1, 1); every step is exact in double.
    const double u = static_cast<double>(splitmix64(base + j) >> 11) * 0x1.0p-52 - 1.0;
    out[j] = u;
    norm2 += u * u;
  }
  if (norm2 == 0.0) {
    out[0] = 1.0;
    return;
  }
  const double norm = std::sqrt(norm2);
  for (double& v : out) v /= norm;
}

std::vector<float> ContextEncoder::token_vector(TokenId token) const {
  std::vector<double> tmp(params_.dim);
  token_vector_into(token, tmp);
  return {tmp.begin(), tmp.end()};
}

void ContextEncoder::encode(std::span<const TokenId> context, std::span<float> out) const {
  if (out.size() != params_.dim) {
    throw std::invalid_argument(fmt::format("encode: output has {} slots, dim is {}", out.size(), params_.dim));
  }
  const std::size_t dim = params_.dim;
  if (context.empty()) {
    std::fill(out.begin(), out.end(), 0.0f);
    return;
  }
  std::vector<double> acc(dim, 0.0);
  std::vector<double> scratch;
  double weight = 1.0;
  double weight_sum = 0.0;
  const std::size_t n = std::min<std::size_t>(params_.window, context.size());
  for (std::size_t i = 1; i <= n; ++i) {
    const TokenId tok = context[context.size() - i];
    const double* e;
    if (tok < table_size_) {
      e = table_.data() + static_cast<std::size_t>(tok) * dim;
    } else {
      scratch.resize(dim);
      token_vector_into(tok, scratch);
      e = scratch.data();
    }
    for (std::size_t d = 0; d < dim; ++d) acc[d] += weight * e[d];
    weight_sum += weight;
    weight *= params_.decay;
  }
  for (std::size_t d = 0; d < dim; ++d) out[d] = static_cast<float>(acc[d] / weight_sum);
}

std::vector<float> ContextEncoder::encode(std::span<const TokenId> context) const {
  std::vector<float> out(params_.dim);
  encode(context, out);
  return out;
}

std::vector<float> ContextEncoder::encode_document(const corpus::Document& doc) const {
  const std::size_t dim = params_.dim;
  std::vector<float> keys(doc.size() * dim);
  const std::span<const TokenId> ids(doc);
  for (std::size_t t = 0; t < doc.size(); ++t) {
    encode(ids.first(t), std::span<float>(keys).subspan(t * dim, dim));
  }
  return keys;
}

}  // namespace tailknn::baselm
