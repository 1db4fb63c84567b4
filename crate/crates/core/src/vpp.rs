//! Desk-scale multi-market virtual power plant scheduling instance.
//!
//! First stage: hourly day-ahead (DAM) energy bids and reserve-capacity (RCM)
//! bids per delivery block. Second stage: battery, heat-pump and EV dispatch,
//! activation-market bids, imbalance position and a linearized radial power
//! flow. Each germ scales one family of inputs uniformly across devices and
//! time steps:
//!
//! | germ        | perturbs                                 |
//! |-------------|------------------------------------------|
//! | `xi_L`      | every load, relative                     |
//! | `xi_G`      | PV availability, relative                |
//! | `xi_T`      | ambient temperature, additive (K)        |
//! | `xi_EV`     | EV energy demand, relative               |
//! | `xi_DAM`    | day-ahead and imbalance prices, additive |
//! | `xi_RCM`    | reserve-capacity prices, additive        |
//! | `xi_RAM_up` | upward activation price, additive        |
//! | `xi_RAM_dn` | downward activation price, additive      |
//!
//! Power is in MW over one-hour steps, so MW and MWh coincide per step.
//! Physical exchange at the substation must equal the DAM schedule minus
//! the expected upward activation plus the expected downward activation
//! plus the imbalance position. Imbalance is settled at a symmetric spread
//! around the DAM price and the grid tariff is charged on net exchange.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polybasis::Distribution;
use crate::sprog::{Expr, GermId, Stage, StochModel, VarId};

/// The canonical desk instance.
pub const DESK_VPP_TOML: &str = include_str!("../data/desk_vpp.toml");

pub const GERM_NAMES: [&str; 8] = [
    "xi_L",
    "xi_G",
    "xi_T",
    "xi_EV",
    "xi_DAM",
    "xi_RCM",
    "xi_RAM_up",
    "xi_RAM_dn",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GermSpec {
    pub name: String,
    /// `normal`, `uniform`, `gamma` or `beta`; a uniform may also be given
    /// by `mean` and `sd`.
    pub kind: String,
    pub params: BTreeMap<String, f64>,
    pub units: String,
    /// Multiplies the deviation from the mean; 0 freezes the germ at its mean.
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl GermSpec {
    pub fn distribution(&self) -> Result<Distribution> {
        let p = |k: &str| self.params.get(k).copied();
        if self.kind == "uniform" && self.params.len() == 2 {
            if let (Some(mean), Some(sd)) = (p("mean"), p("sd")) {
                return Distribution::uniform_from_moments(mean, sd);
            }
        }
        let params: Vec<(&str, f64)> = self.params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        Distribution::from_kind(&self.kind, &params)
    }
}

fn normal_spec(name: &str, sd: f64, units: &str) -> GermSpec {
    GermSpec {
        name: name.into(),
        kind: "normal".into(),
        params: BTreeMap::from([("mean".into(), 0.0), ("sd".into(), sd)]),
        units: units.into(),
        scale: 1.0,
    }
}

/// The eight lumped germs of the desk instance.
pub fn default_uncertainty() -> Vec<GermSpec> {
    vec![
        normal_spec("xi_L", 0.1075, "fraction"),
        normal_spec("xi_G", 0.0815, "fraction"),
        normal_spec("xi_T", 1.5, "K"),
        GermSpec {
            name: "xi_EV".into(),
            kind: "uniform".into(),
            params: BTreeMap::from([("mean".into(), 0.1), ("sd".into(), 0.0577)]),
            units: "fraction".into(),
            scale: 1.0,
        },
        normal_spec("xi_DAM", 4.28, "EUR/MWh"),
        normal_spec("xi_RCM", 3.30, "EUR/MW"),
        normal_spec("xi_RAM_up", 32.08, "EUR/MWh"),
        normal_spec("xi_RAM_dn", 21.25, "EUR/MWh"),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub dam_price: Vec<f64>,
    pub ram_up_price: Vec<f64>,
    pub ram_dn_price: Vec<f64>,
    /// Per reserve block, per MW and hour.
    pub rcm_up_price: Vec<f64>,
    pub rcm_dn_price: Vec<f64>,
    /// Expected activated fraction of an activation bid.
    pub activation_share: f64,
    /// Shortfall bought at `(1 + spread)·price`, surplus sold at `(1 − spread)·price`.
    pub imbalance_spread: f64,
    pub tariff: f64,
    pub prequalified_up: f64,
    pub prequalified_dn: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryConfig {
    pub bus: usize,
    pub power: f64,
    pub energy_min: f64,
    pub energy_max: f64,
    pub soc_init: f64,
    pub eff_charge: f64,
    pub eff_discharge: f64,
    /// Per MWh charged or discharged.
    pub degradation_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvConfig {
    pub bus: usize,
    pub availability: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    pub profile: Vec<f64>,
    /// Fraction of the load at each bus.
    pub bus_shares: Vec<f64>,
    pub power_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatPumpConfig {
    pub bus: usize,
    /// Electric power limit.
    pub power: f64,
    pub cop: f64,
    /// Fraction of the indoor-ambient difference kept per step.
    pub retention: f64,
    /// Indoor temperature rise per MWh of heat.
    pub gain: f64,
    pub comfort_min: f64,
    pub comfort_max: f64,
    pub temp_init: f64,
    pub ambient: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvConfig {
    pub bus: usize,
    pub power: f64,
    pub energy: f64,
    pub plugged: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    pub from: usize,
    pub to: usize,
    /// Per unit on a 1 MVA base.
    pub r: f64,
    pub x: f64,
    /// Active-power limit in either direction.
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Bus 0 is the substation.
    pub buses: usize,
    pub vmin: f64,
    pub vmax: f64,
    pub lines: Vec<LineConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VppConfig {
    pub horizon: usize,
    pub block_hours: usize,
    pub market: MarketConfig,
    pub battery: BatteryConfig,
    pub pv: PvConfig,
    pub load: LoadConfig,
    pub heat_pump: Option<HeatPumpConfig>,
    pub ev: Option<EvConfig>,
    pub network: NetworkConfig,
    #[serde(default = "default_uncertainty")]
    pub uncertainty: Vec<GermSpec>,
}

impl Default for VppConfig {
    fn default() -> Self {
        Self::from_toml_str(DESK_VPP_TOML).expect("bundled config is valid")
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl VppConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: VppConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| invalid(e.to_string()))
    }

    /// Sets every germ's scale.
    pub fn with_uncertainty_scale(mut self, scale: f64) -> Self {
        for g in &mut self.uncertainty {
            g.scale = scale;
        }
        self
    }

    pub fn n_blocks(&self) -> usize {
        self.horizon / self.block_hours.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.horizon;
        if t == 0 || self.block_hours == 0 || t % self.block_hours != 0 {
            return Err(invalid("the horizon must be a positive multiple of block_hours"));
        }
        let nb = self.n_blocks();
        let m = &self.market;
        for (name, v, n) in [
            ("market.dam_price", &m.dam_price, t),
            ("market.ram_up_price", &m.ram_up_price, t),
            ("market.ram_dn_price", &m.ram_dn_price, t),
            ("market.rcm_up_price", &m.rcm_up_price, nb),
            ("market.rcm_dn_price", &m.rcm_dn_price, nb),
            ("pv.availability", &self.pv.availability, t),
            ("load.profile", &self.load.profile, t),
            ("load.bus_shares", &self.load.bus_shares, self.network.buses),
        ] {
            if v.len() != n {
                return Err(invalid(format!("{name} has {} entries, expected {n}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(invalid(format!("{name} contains a non-finite value")));
            }
        }
        let nonneg = |name: &str, x: f64| {
            if x >= 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be finite and non-negative")))
            }
        };
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive")))
            }
        };
        let efficiency = |name: &str, x: f64| {
            if x > 0.0 && x <= 1.0 {
                Ok(())
            } else {
                Err(invalid(format!("{name} must lie in (0, 1]")))
            }
        };
        nonneg("market.activation_share", m.activation_share)?;
        if !(0.0..1.0).contains(&m.imbalance_spread) {
            return Err(invalid("market.imbalance_spread must lie in [0, 1)"));
        }
        nonneg("market.prequalified_up", m.prequalified_up)?;
        nonneg("market.prequalified_dn", m.prequalified_dn)?;
        if !m.tariff.is_finite() {
            return Err(invalid("market.tariff must be finite"));
        }
        let b = &self.battery;
        positive("battery.power", b.power)?;
        positive("battery.energy_max", b.energy_max)?;
        nonneg("battery.energy_min", b.energy_min)?;
        nonneg("battery.degradation_cost", b.degradation_cost)?;
        efficiency("battery.eff_charge", b.eff_charge)?;
        efficiency("battery.eff_discharge", b.eff_discharge)?;
        if !(b.energy_min <= b.soc_init && b.soc_init <= b.energy_max) {
            return Err(invalid("battery.soc_init must lie within the energy limits"));
        }
        if self.pv.availability.iter().any(|&x| x < 0.0) {
            return Err(invalid("pv.availability must be non-negative"));
        }
        if self.load.profile.iter().any(|&x| x < 0.0) || self.load.bus_shares.iter().any(|&x| x < 0.0) {
            return Err(invalid("load profile and shares must be non-negative"));
        }
        if !(self.load.power_factor > 0.0 && self.load.power_factor <= 1.0) {
            return Err(invalid("load.power_factor must lie in (0, 1]"));
        }
        if let Some(h) = &self.heat_pump {
            positive("heat_pump.power", h.power)?;
            positive("heat_pump.cop", h.cop)?;
            positive("heat_pump.gain", h.gain)?;
            efficiency("heat_pump.retention", h.retention)?;
            if !(h.comfort_min < h.comfort_max) {
                return Err(invalid("heat_pump comfort band is empty"));
            }
            if h.ambient.len() != t {
                return Err(invalid(format!("heat_pump.ambient needs {t} entries")));
            }
        }
        if let Some(e) = &self.ev {
            positive("ev.power", e.power)?;
            nonneg("ev.energy", e.energy)?;
            if e.plugged.len() != t || !e.plugged.contains(&true) {
                return Err(invalid(format!("ev.plugged needs {t} entries with at least one plugged hour")));
            }
        }
        self.network_tree()?;
        let net = &self.network;
        if !(0.0 < net.vmin && net.vmin < net.vmax) {
            return Err(invalid("network voltage band is empty"));
        }
        for l in &net.lines {
            positive("line limit", l.limit)?;
            nonneg("line r", l.r)?;
            nonneg("line x", l.x)?;
        }
        let mut buses = vec![("battery.bus", b.bus), ("pv.bus", self.pv.bus)];
        if let Some(h) = &self.heat_pump {
            buses.push(("heat_pump.bus", h.bus));
        }
        if let Some(e) = &self.ev {
            buses.push(("ev.bus", e.bus));
        }
        for (name, bus) in buses {
            if bus == 0 || bus >= net.buses {
                return Err(invalid(format!("{name} must be a non-substation bus below {}", net.buses)));
            }
        }
        let names: Vec<&str> = self.uncertainty.iter().map(|g| g.name.as_str()).collect();
        for need in GERM_NAMES {
            if !names.contains(&need) {
                return Err(invalid(format!("uncertainty is missing germ `{need}`")));
            }
        }
        if names.len() != GERM_NAMES.len() {
            return Err(invalid("uncertainty must declare exactly the eight instance germs"));
        }
        for g in &self.uncertainty {
            nonneg(&format!("scale of {}", g.name), g.scale)?;
            g.distribution()?;
        }
        Ok(())
    }

    /// Parent line of every non-root bus and the buses below each bus.
    fn network_tree(&self) -> Result<(Vec<usize>, Vec<Vec<usize>>)> {
        let net = &self.network;
        let n = net.buses;
        if n < 2 || net.lines.len() != n - 1 {
            return Err(invalid("the network must be a radial tree with buses − 1 lines"));
        }
        let mut parent_line = vec![usize::MAX; n];
        for (k, l) in net.lines.iter().enumerate() {
            if l.from >= n || l.to >= n || l.to == 0 || parent_line[l.to] != usize::MAX {
                return Err(invalid(format!("line {} → {} breaks the radial structure", l.from, l.to)));
            }
            parent_line[l.to] = k;
        }
        let mut subtree = vec![Vec::new(); n];
        for (j, sub) in subtree.iter_mut().enumerate() {
            let mut b = j;
            let mut steps = 0;
            while b != 0 {
                b = net.lines[parent_line[b]].from;
                steps += 1;
                if steps > n {
                    return Err(invalid("the network contains a cycle"));
                }
            }
            sub.push(j);
        }
        for j in 1..n {
            let mut b = net.lines[parent_line[j]].from;
            loop {
                subtree[b].push(j);
                if b == 0 {
                    break;
                }
                b = net.lines[parent_line[b]].from;
            }
        }
        Ok((parent_line, subtree))
    }
}

/// A germ with its mean and scale, for writing `c·ξ` as
/// `c·(μ + s·(ξ − μ))`.
#[derive(Clone, Copy)]
struct Scaled {
    id: GermId,
    mean: f64,
    scale: f64,
}

impl Scaled {
    /// `e + c·ξ`.
    fn add(&self, e: Expr, c: f64) -> Expr {
        let e = e.add_const(c * (1.0 - self.scale) * self.mean);
        if self.scale == 0.0 {
            e
        } else {
            e.add_germ(c * self.scale, self.id)
        }
    }

    /// `e + c·ξ·v`.
    fn add_var(&self, e: Expr, c: f64, v: VarId) -> Expr {
        let e = e.add_var(c * (1.0 - self.scale) * self.mean, v);
        if self.scale == 0.0 {
            e
        } else {
            e.add_germ_var(c * self.scale, self.id, v)
        }
    }
}

/// Builds and finalizes the instance.
pub fn build_instance(cfg: &VppConfig) -> Result<StochModel> {
    cfg.validate()?;
    let (parent_line, subtree) = cfg.network_tree()?;
    let t_max = cfg.horizon;
    let nb = cfg.n_blocks();
    let m = &cfg.market;
    let b = &cfg.battery;
    let mut model = StochModel::new();

    let mut germs = BTreeMap::new();
    for spec in &cfg.uncertainty {
        let dist = spec.distribution()?;
        let mean = dist.mean();
        let id = model.add_germ(&spec.name, dist)?;
        model.set_germ_units(id, &spec.units)?;
        if spec.scale == 0.0 {
            model.declare_unused(id)?;
        }
        germs.insert(
            spec.name.as_str(),
            Scaled {
                id,
                mean,
                scale: spec.scale,
            },
        );
    }
    let xi_l = germs["xi_L"];
    let xi_g = germs["xi_G"];
    let xi_t = germs["xi_T"];
    let xi_ev = germs["xi_EV"];
    let xi_dam = germs["xi_DAM"];
    let xi_rcm = germs["xi_RCM"];
    let xi_up = germs["xi_RAM_up"];
    let xi_dn = germs["xi_RAM_dn"];
    if cfg.heat_pump.is_none() {
        model.declare_unused(xi_t.id)?;
    }
    if cfg.ev.is_none() {
        model.declare_unused(xi_ev.id)?;
    }

    let dam = model.add_variable("dam", Stage::First, &[t_max])?;
    let rc_up = model.add_bounded_variable("rc_up", Stage::First, &[nb], Some(0.0), Some(m.prequalified_up))?;
    let rc_dn = model.add_bounded_variable("rc_dn", Stage::First, &[nb], Some(0.0), Some(m.prequalified_dn))?;

    let ch = model.add_bounded_variable("ch", Stage::Second, &[t_max], Some(0.0), Some(b.power))?;
    let dis = model.add_bounded_variable("dis", Stage::Second, &[t_max], Some(0.0), Some(b.power))?;
    let soc = model.add_bounded_variable("soc", Stage::Second, &[t_max], Some(b.energy_min), Some(b.energy_max))?;
    let hp = match &cfg.heat_pump {
        Some(h) => Some((
            model.add_bounded_variable("hp", Stage::Second, &[t_max], Some(0.0), Some(h.power))?,
            model.add_bounded_variable("theta", Stage::Second, &[t_max], Some(h.comfort_min), Some(h.comfort_max))?,
        )),
        None => None,
    };
    let ev = match &cfg.ev {
        Some(e) => {
            let hours: Vec<usize> = (0..t_max).filter(|&t| e.plugged[t]).collect();
            let h = model.add_bounded_variable("ev", Stage::Second, &[hours.len()], Some(0.0), Some(e.power))?;
            Some((h, hours))
        }
        None => None,
    };
    let act_up = model.add_bounded_variable("act_up", Stage::Second, &[t_max], None, Some(m.prequalified_up))?;
    let act_dn = model.add_bounded_variable("act_dn", Stage::Second, &[t_max], None, Some(m.prequalified_dn))?;
    let imb_pos = model.add_bounded_variable("imb_pos", Stage::Second, &[t_max], Some(0.0), None)?;
    let imb_neg = model.add_bounded_variable("imb_neg", Stage::Second, &[t_max], Some(0.0), None)?;

    for t in 0..t_max {
        let prev = if t == 0 {
            Expr::constant(b.soc_init)
        } else {
            Expr::var(soc.at(t - 1))
        };
        model.add_eq(
            &format!("soc_dyn[{t}]"),
            Expr::var(soc.at(t)),
            prev.add_var(b.eff_charge, ch.at(t))
                .add_var(-1.0 / b.eff_discharge, dis.at(t)),
        )?;
    }
    model.add_le(
        "soc_terminal",
        Expr::constant(b.soc_init),
        Expr::var(soc.at(t_max - 1)),
    )?;

    if let (Some(h), Some((hp, theta))) = (&cfg.heat_pump, &hp) {
        for t in 0..t_max {
            let a = h.retention;
            let prev = if t == 0 {
                Expr::constant(a * h.temp_init)
            } else {
                Expr::new().add_var(a, theta.at(t - 1))
            };
            let rhs = xi_t.add(
                prev.add_const((1.0 - a) * h.ambient[t])
                    .add_var(h.gain * h.cop, hp.at(t)),
                1.0 - a,
            );
            model.add_eq(&format!("theta_dyn[{t}]"), Expr::var(theta.at(t)), rhs)?;
        }
    }

    if let (Some(e), Some((evh, _))) = (&cfg.ev, &ev) {
        let demand = xi_ev.add(Expr::constant(e.energy), e.energy);
        model.add_eq("ev_energy", Expr::sum_vars(1.0, evh.iter()), demand)?;
    }

    let tan_phi = (1.0 / (cfg.load.power_factor * cfg.load.power_factor) - 1.0).sqrt();
    let n_bus = cfg.network.buses;
    let net_p = |t: usize, j: usize| -> Expr {
        let l = cfg.load.bus_shares[j] * cfg.load.profile[t];
        let mut e = xi_l.add(Expr::constant(l), l);
        if j == b.bus {
            e = e.add_var(1.0, ch.at(t)).add_var(-1.0, dis.at(t));
        }
        if j == cfg.pv.bus {
            let a = cfg.pv.availability[t];
            e = xi_g.add(e.add_const(-a), -a);
        }
        if let (Some(h), Some((hp, _))) = (&cfg.heat_pump, &hp) {
            if j == h.bus {
                e = e.add_var(1.0, hp.at(t));
            }
        }
        if let (Some(ec), Some((evh, hours))) = (&cfg.ev, &ev) {
            if j == ec.bus {
                if let Some(k) = hours.iter().position(|&x| x == t) {
                    e = e.add_var(1.0, evh.at(k));
                }
            }
        }
        e
    };
    let net_q = |t: usize, j: usize| -> Expr {
        let q = cfg.load.bus_shares[j] * cfg.load.profile[t] * tan_phi;
        xi_l.add(Expr::constant(q), q)
    };

    let vmin2 = cfg.network.vmin * cfg.network.vmin;
    let vmax2 = cfg.network.vmax * cfg.network.vmax;
    let mut exchange = Vec::with_capacity(t_max);
    for t in 0..t_max {
        let p: Vec<Expr> = (0..n_bus).map(|j| net_p(t, j)).collect();
        let q: Vec<Expr> = (0..n_bus).map(|j| net_q(t, j)).collect();
        let flow_p = |j: usize| subtree[j].iter().fold(Expr::new(), |acc, &k| acc + p[k].clone());
        let flow_q = |j: usize| subtree[j].iter().fold(Expr::new(), |acc, &k| acc + q[k].clone());
        let mut w = vec![Expr::constant(1.0); n_bus];
        // Buses in an order where parents come first.
        let mut order: Vec<usize> = (1..n_bus).collect();
        order.sort_by_key(|&j| std::cmp::Reverse(subtree[j].len()));
        for &j in &order {
            let line = &cfg.network.lines[parent_line[j]];
            let fp = flow_p(j);
            w[j] = w[line.from].clone() - (fp.clone() * (2.0 * line.r) + flow_q(j) * (2.0 * line.x));
            model.add_le(&format!("line{}-{}.max[{t}]", line.from, j), fp.clone(), Expr::constant(line.limit))?;
            model.add_le(&format!("line{}-{}.min[{t}]", line.from, j), Expr::constant(-line.limit), fp)?;
        }
        for j in 1..n_bus {
            model.add_le(&format!("v{j}.max[{t}]"), w[j].clone(), Expr::constant(vmax2))?;
            model.add_le(&format!("v{j}.min[{t}]"), Expr::constant(vmin2), w[j].clone())?;
        }
        exchange.push(flow_p(0));
    }

    let kappa = m.activation_share;
    let hp_power = cfg.heat_pump.as_ref().map_or(0.0, |h| h.power);
    for (t, p0) in exchange.iter().enumerate() {
        let k = t / cfg.block_hours;
        let schedule = Expr::var(dam.at(t))
            .add_var(-kappa, act_up.at(t))
            .add_var(kappa, act_dn.at(t))
            .add_var(1.0, imb_pos.at(t))
            .add_var(-1.0, imb_neg.at(t));
        model.add_eq(&format!("balance[{t}]"), schedule, p0.clone())?;
        model.add_le(&format!("offer_up[{t}]"), Expr::var(rc_up.at(k)), Expr::var(act_up.at(t)))?;
        model.add_le(&format!("offer_dn[{t}]"), Expr::var(rc_dn.at(k)), Expr::var(act_dn.at(t)))?;
        let mut up = Expr::var(act_up.at(t)).add_var(1.0, dis.at(t)).add_var(-1.0, ch.at(t));
        let mut dn = Expr::var(act_dn.at(t)).add_var(1.0, ch.at(t)).add_var(-1.0, dis.at(t));
        if let Some((hp, _)) = &hp {
            up = up.add_var(-1.0, hp.at(t));
            dn = dn.add_var(1.0, hp.at(t));
        }
        model.add_le(&format!("headroom_up[{t}]"), up, Expr::constant(b.power))?;
        model.add_le(&format!("headroom_dn[{t}]"), dn, Expr::constant(b.power + hp_power))?;
    }

    let mut cost = Expr::new();
    for (t, p0) in exchange.into_iter().enumerate() {
        let pi = m.dam_price[t];
        let s = m.imbalance_spread;
        cost = xi_dam.add_var(cost.add_var(pi, dam.at(t)), 1.0, dam.at(t));
        cost = xi_dam.add_var(cost.add_var((1.0 + s) * pi, imb_pos.at(t)), 1.0 + s, imb_pos.at(t));
        cost = xi_dam.add_var(cost.add_var(-(1.0 - s) * pi, imb_neg.at(t)), -(1.0 - s), imb_neg.at(t));
        cost = xi_up.add_var(cost.add_var(-kappa * m.ram_up_price[t], act_up.at(t)), -kappa, act_up.at(t));
        cost = xi_dn.add_var(cost.add_var(kappa * m.ram_dn_price[t], act_dn.at(t)), kappa, act_dn.at(t));
        cost = cost + p0 * m.tariff;
        cost = cost
            .add_var(b.degradation_cost, ch.at(t))
            .add_var(b.degradation_cost, dis.at(t));
    }
    let hours = cfg.block_hours as f64;
    for k in 0..nb {
        cost = xi_rcm.add_var(cost.add_var(-hours * m.rcm_up_price[k], rc_up.at(k)), -hours, rc_up.at(k));
        cost = xi_rcm.add_var(cost.add_var(-hours * m.rcm_dn_price[k], rc_dn.at(k)), -hours, rc_dn.at(k));
    }
    model.set_objective(cost)?;
    model.finalize()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{assemble_extensive_form, solve, SolverSettings};

    #[test]
    fn bundled_config_builds() {
        let cfg = VppConfig::default();
        assert_eq!(cfg.uncertainty, default_uncertainty());
        let m = build_instance(&cfg).unwrap();
        assert_eq!(m.germs().len(), 8);
        assert_eq!(m.unused_germs().count(), 0);
        let s = m.summary();
        assert_eq!(s.n_first, 24 + 2 * 6);
        assert!(s.n_second > 100 && s.n_second < 400, "{s:?}");
    }

    #[test]
    fn default_germs() {
        let g = default_uncertainty();
        assert_eq!(g.len(), 8);
        let t = g.iter().find(|g| g.name == "xi_T").unwrap().distribution().unwrap();
        assert_eq!((t.kind_name(), t.mean(), t.sd()), ("normal", 0.0, 1.5));
        let ev = g.iter().find(|g| g.name == "xi_EV").unwrap().distribution().unwrap();
        assert!((ev.mean() - 0.1).abs() < 1e-12 && (ev.sd() - 0.0577).abs() < 1e-12);
        let dn = g.iter().find(|g| g.name == "xi_RAM_dn").unwrap().distribution().unwrap();
        assert_eq!((dn.mean(), dn.sd()), (0.0, 21.25));
    }

    #[test]
    fn toml_round_trip_and_validation() {
        let cfg = VppConfig::default();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(VppConfig::from_toml_str(&text).unwrap(), cfg);
        let mut bad = cfg.clone();
        bad.battery.eff_charge = 1.2;
        assert!(bad.validate().is_err());
        let mut bad = cfg.clone();
        bad.market.dam_price.pop();
        assert!(bad.validate().is_err());
        let mut bad = cfg.clone();
        bad.heat_pump.as_mut().unwrap().comfort_max = 19.0;
        assert!(bad.validate().is_err());
        let mut bad = cfg;
        bad.uncertainty.pop();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_scale_declares_germs_unused() {
        let m = build_instance(&VppConfig::default().with_uncertainty_scale(0.0)).unwrap();
        assert_eq!(m.unused_germs().count(), 8);
        assert!(m.constraints().iter().all(|c| !c.expr.has_germ()));
        assert!(!m.objective().unwrap().has_germ());
    }

    /// Two hours, battery only, prices 10 then 50, 95% efficiency each way.
    /// By hand: charge 1 MW at hour 0 (soc 0.95), discharge 0.9025 MW at
    /// hour 1, cost 10 − 50·0.9025 = −35.125.
    #[test]
    fn two_step_arbitrage() {
        let mut cfg = VppConfig::default();
        cfg.horizon = 2;
        cfg.block_hours = 2;
        cfg.market.dam_price = vec![10.0, 50.0];
        cfg.market.ram_up_price = vec![0.0; 2];
        cfg.market.ram_dn_price = vec![0.0; 2];
        cfg.market.rcm_up_price = vec![0.0];
        cfg.market.rcm_dn_price = vec![0.0];
        cfg.market.tariff = 0.0;
        cfg.market.prequalified_up = 0.0;
        cfg.market.prequalified_dn = 0.0;
        cfg.battery = BatteryConfig {
            bus: 1,
            power: 1.0,
            energy_min: 0.0,
            energy_max: 1.0,
            soc_init: 0.0,
            eff_charge: 0.95,
            eff_discharge: 0.95,
            degradation_cost: 0.0,
        };
        cfg.pv.availability = vec![0.0; 2];
        cfg.load.profile = vec![0.0; 2];
        cfg.heat_pump = None;
        cfg.ev = None;
        cfg = cfg.with_uncertainty_scale(0.0);
        let m = build_instance(&cfg).unwrap();
        let ef = assemble_extensive_form(&m, &[m.germ_means()], &[1.0]).unwrap();
        let (obj, x) = solve(&ef.problem, &SolverSettings::default())
            .unwrap()
            .into_solution()
            .unwrap();
        assert!((obj + 35.125).abs() < 1e-6, "{obj}");
        let v = ef.scenario_values(&x, 0);
        let dam = m.variable("dam").unwrap();
        assert!((v[dam.at(0).0] - 1.0).abs() < 1e-6);
        assert!((v[dam.at(1).0] + 0.9025).abs() < 1e-6);
    }
}
