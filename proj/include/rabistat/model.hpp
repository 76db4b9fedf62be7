#pragma once

// Hamiltonians of a cavity coupled to two-level emitters, without the
// rotating-wave approximation unless stated.
//
// Tensor factor order is (TLS_1 ... TLS_J, mode_1, mode_2 ...). Within a TLS
// factor index 0 is the ground state; within a mode factor the index is the
// photon number.

#include <cstddef>
#include <string>
#include <vector>

#include "rabistat/operator_core.hpp"

namespace rabistat {

inline constexpr std::size_t kDefaultDimensionCap = 4096;
inline constexpr std::size_t kDefaultFockTruncation = 20;

struct RabiParams {
    double omega0 = 1.0;
    double omega_x = 1.0;
    double g = 0.0;
    std::size_t n_fock = kDefaultFockTruncation;

    void validate() const;
};

struct EmitterCoupling {
    double omega_x = 1.0;
    double g = 0.0;
};

struct MultiTlsParams {
    double omega0 = 1.0;
    std::vector<EmitterCoupling> emitters;
    std::size_t n_fock = kDefaultFockTruncation;

    void validate() const;
};

struct ModeCoupling {
    double omega0 = 1.0;
    double g = 0.0;
    std::size_t n_fock = kDefaultFockTruncation;
};

struct TwoModeParams {
    ModeCoupling mode1;
    ModeCoupling mode2;
    double omega_x = 1.0;

    void validate() const;
};

enum class ModelKind { Rabi, MultiTls, TwoMode };

HilbertSpace rabi_space(std::size_t n_fock);

QOperator build_rabi(const RabiParams& params);
// Jaynes-Cummings form; conserves a^dagger a + sigma^+ sigma^-.
QOperator build_rwa(const RabiParams& params);
QOperator build_multi_tls(const MultiTlsParams& params,
                          std::size_t dim_cap = kDefaultDimensionCap);
QOperator build_two_mode(const TwoModeParams& params,
                         std::size_t dim_cap = kDefaultDimensionCap);

QOperator excitation_number(const HilbertSpace& space, ModelKind kind);
// exp(i pi N_exc); diagonal with entries +-1 in the bare basis.
QOperator parity_operator(const HilbertSpace& space, ModelKind kind);

enum class ChannelKind { Cavity, Emitter };

// A bath coupled through the bare lowering operator `op`.
struct Channel {
    std::string name;
    ChannelKind kind;
    QOperator op;
};

// Everything the dressed-basis machinery needs from a model: the Hamiltonian,
// its parity symmetry, the detected cavity field X = -i (a - a^dagger) with unit
// zero-point amplitude, and the loss channels.
struct CavitySystem {
    ModelKind kind;
    QOperator hamiltonian;
    QOperator parity;
    QOperator field;
    std::vector<Channel> channels;
};

CavitySystem rabi_system(const RabiParams& params);
CavitySystem multi_tls_system(const MultiTlsParams& params,
                              std::size_t dim_cap = kDefaultDimensionCap);
// The detected field is that of mode 1; mode 2 only adds a loss channel.
CavitySystem two_mode_system(const TwoModeParams& params,
                             std::size_t dim_cap = kDefaultDimensionCap);

}  // namespace rabistat
