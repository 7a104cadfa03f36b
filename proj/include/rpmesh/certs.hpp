// Copyright (c) 2026 the rpmesh authors
// Distributed under the MIT license, see LICENSE.
//
// Programmatic generation of the trust root and per-node leaf certificates.
// Every node presents a leaf bound to its address and accepts only peers
// whose leaves chain to the shared root.
#pragma once

#include <arpa/inet.h>

#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/x509.h>
#include <openssl/x509v3.h>

#include <atomic>
#include <ctime>
#include <memory>
#include <stdexcept>
#include <string>

#include "rpmesh/fsio.hpp"

namespace rpmesh {

struct Identity {
  std::string cert_pem;
  std::string key_pem;
};

namespace detail {

struct OsslDeleter {
  void operator()(X509* p) const { X509_free(p); }
  void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
  void operator()(BIO* p) const { BIO_free(p); }
};
template <typename T>
using OsslPtr = std::unique_ptr<T, OsslDeleter>;

inline std::string bio_to_string(BIO* b) {
  char* data = nullptr;
  const long n = BIO_get_mem_data(b, &data);
  return std::string(data, data + static_cast<std::size_t>(n));
}

inline OsslPtr<EVP_PKEY> gen_key() {
  EVP_PKEY* k = EVP_PKEY_Q_keygen(nullptr, nullptr, "EC", "P-256");
  if (!k) throw std::runtime_error("key generation failed");
  return OsslPtr<EVP_PKEY>(k);
}

inline OsslPtr<X509> parse_cert_pem(const std::string& pem) {
  OsslPtr<BIO> b(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())));
  X509* c = b ? PEM_read_bio_X509(b.get(), nullptr, nullptr, nullptr) : nullptr;
  if (!c) throw std::runtime_error("cannot parse certificate PEM");
  return OsslPtr<X509>(c);
}

inline OsslPtr<EVP_PKEY> parse_key_pem(const std::string& pem) {
  OsslPtr<BIO> b(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())));
  EVP_PKEY* k = b ? PEM_read_bio_PrivateKey(b.get(), nullptr, nullptr, nullptr) : nullptr;
  if (!k) throw std::runtime_error("cannot parse private key PEM");
  return OsslPtr<EVP_PKEY>(k);
}

inline std::int64_t next_serial() {
  static std::atomic<std::int64_t> counter{
      static_cast<std::int64_t>(std::time(nullptr)) << 16};
  return counter.fetch_add(1);
}

inline void add_ext(X509* cert, X509* issuer, int nid, const char* value) {
  X509V3_CTX ctx;
  X509V3_set_ctx_nodb(&ctx);
  X509V3_set_ctx(&ctx, issuer, cert, nullptr, nullptr, 0);
  X509_EXTENSION* ex = X509V3_EXT_conf_nid(nullptr, &ctx, nid, value);
  if (!ex) throw std::runtime_error("cannot build certificate extension");
  X509_add_ext(cert, ex, -1);
  X509_EXTENSION_free(ex);
}

inline void set_subject_cn(X509* cert, const std::string& cn) {
  X509_NAME* name = X509_get_subject_name(cert);
  X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_ASC,
                             reinterpret_cast<const unsigned char*>(cn.c_str()), -1,
                             -1, 0);
}

inline Identity finish_cert(X509* cert, EVP_PKEY* key, EVP_PKEY* sign_key) {
  if (X509_sign(cert, sign_key, EVP_sha256()) == 0)
    throw std::runtime_error("certificate signing failed");
  OsslPtr<BIO> cb(BIO_new(BIO_s_mem()));
  OsslPtr<BIO> kb(BIO_new(BIO_s_mem()));
  if (!cb || !kb || PEM_write_bio_X509(cb.get(), cert) != 1 ||
      PEM_write_bio_PrivateKey(kb.get(), key, nullptr, nullptr, 0, nullptr,
                               nullptr) != 1)
    throw std::runtime_error("PEM encoding failed");
  return Identity{bio_to_string(cb.get()), bio_to_string(kb.get())};
}

inline bool host_is_ip(const std::string& host) {
  in_addr a4;
  in6_addr a6;
  return inet_pton(AF_INET, host.c_str(), &a4) == 1 ||
         inet_pton(AF_INET6, host.c_str(), &a6) == 1;
}

}  // namespace detail

inline Identity make_root_ca(const std::string& common_name, int days = 3650) {
  auto key = detail::gen_key();
  detail::OsslPtr<X509> cert(X509_new());
  if (!cert) throw std::runtime_error("X509_new failed");
  X509_set_version(cert.get(), 2);
  ASN1_INTEGER_set_int64(X509_get_serialNumber(cert.get()), detail::next_serial());
  X509_gmtime_adj(X509_getm_notBefore(cert.get()), -3600);
  X509_gmtime_adj(X509_getm_notAfter(cert.get()), 86400L * days);
  detail::set_subject_cn(cert.get(), common_name);
  X509_set_issuer_name(cert.get(), X509_get_subject_name(cert.get()));
  X509_set_pubkey(cert.get(), key.get());
  detail::add_ext(cert.get(), cert.get(), NID_basic_constraints, "critical,CA:TRUE");
  detail::add_ext(cert.get(), cert.get(), NID_key_usage,
                  "critical,keyCertSign,cRLSign");
  detail::add_ext(cert.get(), cert.get(), NID_subject_key_identifier, "hash");
  return detail::finish_cert(cert.get(), key.get(), key.get());
}

// Leaf bound to one node address; usable on both sides of the handshake.
// Negative days produce an already-expired certificate (test aid).
inline Identity make_leaf(const Identity& root, const std::string& host,
                          int days = 365) {
  auto ca_cert = detail::parse_cert_pem(root.cert_pem);
  auto ca_key = detail::parse_key_pem(root.key_pem);
  auto key = detail::gen_key();
  detail::OsslPtr<X509> cert(X509_new());
  if (!cert) throw std::runtime_error("X509_new failed");
  X509_set_version(cert.get(), 2);
  ASN1_INTEGER_set_int64(X509_get_serialNumber(cert.get()), detail::next_serial());
  X509_gmtime_adj(X509_getm_notBefore(cert.get()),
                  days < 0 ? 86400L * (days - 1) : -3600);
  X509_gmtime_adj(X509_getm_notAfter(cert.get()), 86400L * days);
  detail::set_subject_cn(cert.get(), host);
  X509_set_issuer_name(cert.get(), X509_get_subject_name(ca_cert.get()));
  X509_set_pubkey(cert.get(), key.get());
  detail::add_ext(cert.get(), ca_cert.get(), NID_basic_constraints,
                  "critical,CA:FALSE");
  detail::add_ext(cert.get(), ca_cert.get(), NID_key_usage,
                  "critical,digitalSignature,keyEncipherment");
  detail::add_ext(cert.get(), ca_cert.get(), NID_ext_key_usage,
                  "serverAuth,clientAuth");
  const std::string san =
      (detail::host_is_ip(host) ? "IP:" : "DNS:") + host;
  detail::add_ext(cert.get(), ca_cert.get(), NID_subject_alt_name, san.c_str());
  detail::add_ext(cert.get(), ca_cert.get(), NID_authority_key_identifier,
                  "keyid:always");
  return detail::finish_cert(cert.get(), key.get(), ca_key.get());
}

inline void write_identity(const Identity& id, const std::string& cert_path,
                           const std::string& key_path) {
  write_text_file(cert_path, id.cert_pem);
  write_text_file(key_path, id.key_pem);
}

}  // namespace rpmesh
