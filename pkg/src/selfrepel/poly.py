"""Sparse multivariate polynomials used as generator test functions.

Variables are ordered ``(c1, s1, c2, s2, ..., cn, sn)``. Derivatives are
exact, so ``apply_generator`` carries no finite-difference error.
"""

import re

import numpy as np


class PolyTestFn:
    """Polynomial ``sum(coef * prod(z_i ** e_i))`` in ``nvars`` variables."""

    def __init__(self, terms, nvars):
        self.nvars = int(nvars)
        clean = {}
        for exps, coef in dict(terms).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.nvars:
                raise ValueError("exponent vector has length %d, expected %d"
                                 % (len(exps), self.nvars))
            if any(e < 0 for e in exps):
                raise ValueError("negative exponent in %r" % (exps,))
            if coef != 0:
                clean[exps] = clean.get(exps, 0.0) + float(coef)
        self.terms = {k: v for k, v in clean.items() if v != 0}

    @classmethod
    def constant(cls, value, nvars):
        return cls({(0,) * nvars: value}, nvars)

    @classmethod
    def var(cls, index, nvars):
        exps = [0] * nvars
        exps[index] = 1
        return cls({tuple(exps): 1.0}, nvars)

    @classmethod
    def c(cls, j, n):
        """The coordinate ``c_j`` (1-based mode index) of an n-mode model."""
        return cls.var(2 * (j - 1), 2 * n)

    @classmethod
    def s(cls, j, n):
        return cls.var(2 * (j - 1) + 1, 2 * n)

    @classmethod
    def parse(cls, text, n):
        """Parse products of powers such as ``"c1^2*s1"`` or ``"3*c2^4"``.

        Only the monomial-with-coefficient form is accepted; sums are built
        by adding parsed pieces.
        """
        nvars = 2 * n
        exps = [0] * nvars
        coef = 1.0
        for factor in text.replace(" ", "").split("*"):
            m = re.fullmatch(r"([cs])(\d+)(?:\^(\d+))?", factor)
            if m:
                j = int(m.group(2))
                if not 1 <= j <= n:
                    raise ValueError("mode %d out of range in %r" % (j, text))
                idx = 2 * (j - 1) + (m.group(1) == "s")
                exps[idx] += int(m.group(3) or 1)
            else:
                try:
                    coef *= float(factor)
                except ValueError:
                    raise ValueError("cannot parse factor %r in %r"
                                     % (factor, text)) from None
        return cls({tuple(exps): coef}, nvars)

    def is_zero(self):
        return not self.terms

    @property
    def degree(self):
        return max((sum(e) for e in self.terms), default=0)

    def deriv(self, index):
        out = {}
        for exps, coef in self.terms.items():
            e = exps[index]
            if e == 0:
                continue
            new = list(exps)
            new[index] = e - 1
            new = tuple(new)
            out[new] = out.get(new, 0.0) + coef * e
        return PolyTestFn(out, self.nvars)

    def __call__(self, z):
        """Evaluate at points ``z`` of shape ``(..., nvars)``."""
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.nvars:
            raise ValueError("expected trailing dimension %d" % self.nvars)
        out = np.zeros(z.shape[:-1])
        for exps, coef in self.terms.items():
            term = np.full(z.shape[:-1], coef)
            for i, e in enumerate(exps):
                if e:
                    term = term * z[..., i] ** e
            out = out + term
        return out

    def _coerce(self, other):
        if isinstance(other, PolyTestFn):
            if other.nvars != self.nvars:
                raise ValueError("polynomials live in different spaces")
            return other
        return PolyTestFn.constant(other, self.nvars)

    def __add__(self, other):
        other = self._coerce(other)
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms.get(k, 0.0) + v
        return PolyTestFn(terms, self.nvars)

    __radd__ = __add__

    def __neg__(self):
        return PolyTestFn({k: -v for k, v in self.terms.items()}, self.nvars)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        out = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                k = tuple(a + b for a, b in zip(e1, e2))
                out[k] = out.get(k, 0.0) + c1 * c2
        return PolyTestFn(out, self.nvars)

    __rmul__ = __mul__

    def __pow__(self, k):
        out = PolyTestFn.constant(1.0, self.nvars)
        for _ in range(int(k)):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, PolyTestFn):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __repr__(self):
        if not self.terms:
            return "PolyTestFn(0)"
        names = []
        for i in range(self.nvars):
            names.append(("c%d" if i % 2 == 0 else "s%d") % (i // 2 + 1))
        parts = []
        for exps, coef in sorted(self.terms.items()):
            mono = "*".join(n if e == 1 else "%s^%d" % (n, e)
                            for n, e in zip(names, exps) if e)
            parts.append("%g" % coef + ("*" + mono if mono else ""))
        return "PolyTestFn(" + " + ".join(parts) + ")"
