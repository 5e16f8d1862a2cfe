//! Prescribed-time scaling functions and gain schedules.
//!
//! The scaling function `mu(t, h) = tau^h` diverges as `t -> tf` and drives
//! the tracking errors to zero before the terminal time. Two shapes of
//! `tau` are supported: the logarithmic form `1 + ln(tf / (tf - t))` used by
//! the guidance controller, and the pure power form `tf / (tf - t)` for
//! which the closed-form `phi` expression is exact.

/// Shape of the time-warping function `tau(t, tf)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TauKind {
    /// `tau = 1 + ln(tf / (tf - t))`
    #[default]
    Log,
    /// `tau = tf / (tf - t)`
    Power,
}

/// Time-varying gain schedule for the two-layer controller.
///
/// `mu` is singular at `tf`; all evaluations inside `[tf - eps_clamp, tf)`
/// are frozen at the clamp point, and for `t >= tf` the schedule switches to
/// the constant-gain branch (`mu = 1`, `tau_rate = 0`).
#[derive(Debug, Clone, Copy)]
pub struct GainSchedule {
    pub tf: f64,
    pub h1: f64,
    pub h2: f64,
    pub k1: f64,
    pub k2: f64,
    pub lambda2: f64,
    pub eps_clamp: f64,
    pub mu_cap: Option<f64>,
    pub kind: TauKind,
}

impl GainSchedule {
    pub fn new(tf: f64, h1: f64, h2: f64, k1: f64, k2: f64, lambda2: f64, eps_clamp: f64) -> Self {
        assert!(tf > 0.0 && h1 > 0.0 && h2 > 0.0 && k1 > 0.0 && k2 > 0.0 && lambda2 > 0.0);
        assert!(eps_clamp > 0.0 && eps_clamp < tf);
        GainSchedule {
            tf,
            h1,
            h2,
            k1,
            k2,
            lambda2,
            eps_clamp,
            mu_cap: None,
            kind: TauKind::Log,
        }
    }

    pub fn with_kind(mut self, kind: TauKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_mu_cap(mut self, cap: f64) -> Self {
        self.mu_cap = Some(cap);
        self
    }

    /// Clamp policy: times in `[tf - eps_clamp, tf)` evaluate at the clamp
    /// point; `t >= tf` selects the constant branch.
    fn effective_time(&self, t: f64) -> Option<f64> {
        if t >= self.tf {
            None
        } else {
            Some(t.min(self.tf - self.eps_clamp))
        }
    }

    fn tau_raw(&self, t: f64) -> (f64, f64) {
        let rem = self.tf - t;
        match self.kind {
            TauKind::Log => (1.0 + (self.tf / rem).ln(), 1.0 / rem),
            TauKind::Power => {
                let tau = self.tf / rem;
                (tau, tau * tau / self.tf)
            }
        }
    }

    /// `(tau, tau_rate)` under the clamp policy.
    pub fn tau_pair(&self, t: f64) -> (f64, f64) {
        match self.effective_time(t) {
            None => (1.0, 0.0),
            Some(te) => self.tau_raw(te),
        }
    }

    pub fn tau(&self, t: f64) -> f64 {
        self.tau_pair(t).0
    }

    pub fn tau_rate(&self, t: f64) -> f64 {
        self.tau_pair(t).1
    }

    /// Scaling function `mu(t, h)`.
    pub fn mu(&self, t: f64, h: f64) -> f64 {
        assert!(h > 0.0);
        let mu = match self.effective_time(t) {
            None => 1.0,
            Some(te) => self.tau_raw(te).0.powf(h),
        };
        match self.mu_cap {
            Some(cap) => mu.min(cap),
            None => mu,
        }
    }

    /// `mu_rate = h * mu * tau_rate / tau` on the pre-`tf` branch, zero after.
    pub fn mu_rate(&self, t: f64, h: f64) -> f64 {
        assert!(h > 0.0);
        match self.effective_time(t) {
            None => 0.0,
            Some(te) => {
                let (tau, tau_rate) = self.tau_raw(te);
                let mu = tau.powf(h);
                if let Some(cap) = self.mu_cap {
                    if mu >= cap {
                        return 0.0;
                    }
                }
                h * mu * tau_rate / tau
            }
        }
    }

    pub fn mu1(&self, t: f64) -> f64 {
        self.mu(t, self.h1)
    }

    pub fn mu2(&self, t: f64) -> f64 {
        self.mu(t, self.h2)
    }

    /// `k2*mu2 > k1*mu1` ordering recommended for the cascade; holds for all
    /// `t` in `[0, tf - eps_clamp]` when `k2 > k1` and `h2 >= h1`.
    pub fn ordering_ok(&self) -> bool {
        self.k2 > self.k1 && self.h2 >= self.h1
    }

    /// `phi(t, h) = -∫₀ᵗ mu(ν, h) dν`, evaluated by composite Simpson with
    /// interval doubling. Valid for any `tau` shape.
    pub fn phi_numeric(&self, t: f64, h: f64) -> f64 {
        let t = match self.effective_time(t) {
            None => self.tf - self.eps_clamp,
            Some(te) => te,
        };
        if t <= 0.0 {
            return 0.0;
        }
        let f = |x: f64| self.mu(x, h);
        -simpson_adaptive(&f, 0.0, t, 1e-12)
    }

    /// Closed form `tf/(h-1) * (1 - mu^((h-1)/h))`; exact only for the
    /// power-law `tau`. Kept as a cross-check, not used in envelopes.
    pub fn phi_closed_power(&self, t: f64, h: f64) -> f64 {
        assert!((h - 1.0).abs() > f64::EPSILON, "closed form requires h != 1");
        let mu = self.mu(t, h);
        self.tf / (h - 1.0) * (1.0 - mu.powf((h - 1.0) / h))
    }
}

/// Composite Simpson with interval doubling until the Richardson estimate
/// drops below `rel_tol`.
pub fn simpson_adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let mut n = 32usize;
    let mut prev = simpson_fixed(f, a, b, n);
    for _ in 0..22 {
        n *= 2;
        let cur = simpson_fixed(f, a, b, n);
        let err = (cur - prev).abs() / 15.0;
        if err <= rel_tol * cur.abs().max(1e-300) {
            return cur;
        }
        prev = cur;
    }
    prev
}

pub fn simpson_fixed(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Numerical proxy for `lim_{t->tf} (tf - t) * mu1 * mu2 = ∞` (the `Rf = 0`
/// admissibility condition): the product must grow monotonically beyond
/// `threshold` over a geometric sequence of shrinking margins.
pub fn product_diverges(kind: TauKind, h1: f64, h2: f64, tf: f64) -> bool {
    let sched = GainSchedule {
        tf,
        h1,
        h2,
        k1: 1.0,
        k2: 1.0,
        lambda2: 1.0,
        eps_clamp: tf * 2f64.powi(-45),
        mu_cap: None,
        kind,
    };
    let mut prev = f64::NEG_INFINITY;
    let mut monotone = true;
    let mut last = 0.0;
    for k in 4..=40 {
        let eps = tf * 2f64.powi(-k);
        let t = tf - eps;
        let val = eps * sched.mu(t, h1) * sched.mu(t, h2);
        if val <= prev {
            monotone = false;
        }
        prev = val;
        last = val;
    }
    monotone && last > 1e6
}
