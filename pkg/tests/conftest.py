"""Shared fixtures and an independent Gaussian mutual-information oracle.

The oracle computes differential entropies from eigenvalues and conditional
covariances from explicit inverses, so it shares no code path with the
Cholesky/Schur routines under test.
"""

import numpy as np
import pytest

from cranlab.scenario import ClusterConfig, QuantizationConfig, generate_channel


def entropy_bits(cov):
    """log2 det via eigenvalues (entropy up to the log(pi e) constant)."""
    eigs = np.linalg.eigvalsh((cov + cov.conj().T) / 2)
    return float(np.sum(np.log2(eigs)))


def conditional_cov(cov, target, given):
    """Q_tt - Q_tg Q_gg^-1 Q_gt by explicit inversion, on element indices."""
    q_tt = cov[np.ix_(target, target)]
    if len(given) == 0:
        return q_tt
    q_tg = cov[np.ix_(target, given)]
    q_gg = cov[np.ix_(given, given)]
    return q_tt - q_tg @ np.linalg.inv(q_gg) @ q_tg.conj().T


def ru_elements(js, ru_antennas):
    return [j * ru_antennas + a for j in js for a in range(ru_antennas)]


class GaussianOracle:
    """Rates and fronthaul costs written directly as entropy differences."""

    @staticmethod
    def ul_signal(cfg, ch, ues):
        out = np.zeros((cfg.ru_dim, cfg.ru_dim), dtype=complex)
        for i in ues:
            h = ch.ul_column(i)
            out += h @ cfg.ue_tx_cov[i] @ h.conj().T
        return out

    @classmethod
    def ul_rate_linear(cls, cfg, ch, q):
        base = cfg.noise_var_ul * np.eye(cfg.ru_dim) + q.cov
        everyone = range(cfg.n_ue)
        total = cls.ul_signal(cfg, ch, everyone) + base
        return [entropy_bits(total)
                - entropy_bits(cls.ul_signal(cfg, ch, [k for k in everyone if k != i]) + base)
                for i in everyone]

    @classmethod
    def ul_rate_sic(cls, cfg, ch, q, order):
        base = cfg.noise_var_ul * np.eye(cfg.ru_dim) + q.cov
        rates = [0.0] * cfg.n_ue
        for pos, i in enumerate(order):
            rates[i] = (entropy_bits(cls.ul_signal(cfg, ch, order[pos:]) + base)
                        - entropy_bits(cls.ul_signal(cfg, ch, order[pos + 1:]) + base))
        return rates

    @classmethod
    def ul_fronthaul_indep(cls, cfg, ch, q):
        received = cls.ul_signal(cfg, ch, range(cfg.n_ue)) + cfg.noise_var_ul * np.eye(cfg.ru_dim)
        out = []
        for j in range(cfg.n_ru):
            idx = ru_elements([j], cfg.ru_antennas)
            q_jj = q.cov[np.ix_(idx, idx)]
            out.append(entropy_bits(received[np.ix_(idx, idx)] + q_jj) - entropy_bits(q_jj))
        return out

    @classmethod
    def ul_fronthaul_wyner_ziv(cls, cfg, ch, q, order):
        # I(y_j; y_hat_j | y_hat_prev) = h(y_hat_j | prev) - h(q_j)
        received = cls.ul_signal(cfg, ch, range(cfg.n_ue)) + cfg.noise_var_ul * np.eye(cfg.ru_dim)
        compressed = received + q.cov
        out = [0.0] * cfg.n_ru
        for pos, j in enumerate(order):
            idx = ru_elements([j], cfg.ru_antennas)
            prev = ru_elements(order[:pos], cfg.ru_antennas)
            cond = conditional_cov(compressed, idx, prev)
            out[j] = entropy_bits(cond) - entropy_bits(q.cov[np.ix_(idx, idx)])
        return out

    @staticmethod
    def _dl_received(cfg, ch, plan, q, i, ues):
        h = ch.dl_row(i)
        s = sum((plan.per_ue_tx_cov[k] for k in ues), np.zeros_like(q.cov))
        return h @ (s + q.cov) @ h.conj().T + cfg.noise_var_dl * np.eye(h.shape[0])

    @classmethod
    def dl_rate_linear(cls, cfg, ch, plan, q):
        everyone = list(range(cfg.n_ue))
        return [entropy_bits(cls._dl_received(cfg, ch, plan, q, i, everyone))
                - entropy_bits(cls._dl_received(cfg, ch, plan, q, i,
                                                [k for k in everyone if k != i]))
                for i in everyone]

    @classmethod
    def dl_rate_dpc(cls, cfg, ch, plan, q, order):
        rates = [0.0] * cfg.n_ue
        for pos, i in enumerate(order):
            rates[i] = (entropy_bits(cls._dl_received(cfg, ch, plan, q, i, order[pos:]))
                        - entropy_bits(cls._dl_received(cfg, ch, plan, q, i, order[pos + 1:])))
        return rates

    @staticmethod
    def dl_fronthaul_indep(cfg, plan, q):
        total = sum(plan.per_ue_tx_cov, np.zeros_like(q.cov))
        out = []
        for j in range(cfg.n_ru):
            idx = ru_elements([j], cfg.ru_antennas)
            q_jj = q.cov[np.ix_(idx, idx)]
            out.append(entropy_bits(total[np.ix_(idx, idx)] + q_jj) - entropy_bits(q_jj))
        return out

    @classmethod
    def dl_fronthaul_multivariate(cls, cfg, plan, q, order):
        indep = cls.dl_fronthaul_indep(cfg, plan, q)
        out = [0.0] * cfg.n_ru
        for pos, j in enumerate(order):
            idx = ru_elements([j], cfg.ru_antennas)
            prev = ru_elements(order[:pos], cfg.ru_antennas)
            surcharge = (entropy_bits(q.cov[np.ix_(idx, idx)])
                         - entropy_bits(conditional_cov(q.cov, idx, prev)))
            out[j] = indep[j] + surcharge
        return out


@pytest.fixture
def oracle():
    return GaussianOracle


def random_psd(rng, dim, scale=1.0):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * (a @ a.conj().T / dim + 0.1 * np.eye(dim))


def random_instance(seed, n_ue=None, n_ru=None, ru_antennas=None, ue_antennas=None):
    """Random cluster, channel and block-diagonal quantizer (N_U, N_R <= 4)."""
    rng = np.random.default_rng(seed)
    n_ue = n_ue or int(rng.integers(1, 5))
    n_ru = n_ru or int(rng.integers(1, 5))
    ru_antennas = ru_antennas or int(rng.integers(1, 3))
    ue_antennas = ue_antennas or int(rng.integers(1, 3))
    cfg = ClusterConfig(
        n_ue=n_ue,
        n_ru=n_ru,
        fronthaul_caps=tuple(rng.uniform(1.0, 6.0, n_ru)),
        ue_antennas=ue_antennas,
        ru_antennas=ru_antennas,
        noise_var_ul=float(rng.uniform(0.1, 1.0)),
        noise_var_dl=float(rng.uniform(0.1, 1.0)),
        ue_tx_cov=tuple(random_psd(rng, ue_antennas) for _ in range(n_ue)),
        pathloss_db=rng.uniform(0.0, 10.0, (n_ru, n_ue)),
    )
    ch = generate_channel(cfg, seed)
    q = QuantizationConfig.from_blocks(
        [random_psd(rng, ru_antennas, 0.2) for _ in range(n_ru)])
    return cfg, ch, q, rng


@pytest.fixture
def small_cluster():
    """2 UEs, 3 RUs with 2 antennas each, equal 3-bit caps."""
    return ClusterConfig(n_ue=2, n_ru=3, fronthaul_caps=(3.0, 3.0, 3.0), ru_antennas=2,
                         noise_var_ul=0.1, noise_var_dl=0.1)


@pytest.fixture
def scalar_cluster():
    """One UE, one single-antenna RU, unit power and noise."""
    return ClusterConfig(n_ue=1, n_ru=1, fronthaul_caps=(2.0,))
