use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on total qubits for state vectors.
pub const PURE_QUBIT_CAP: usize = 22;
/// Default cap on total qubits for density matrices.
pub const MIXED_QUBIT_CAP: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Register {
    pub name: String,
    pub qubits: usize,
}

/// Ordered named registers. The first register occupies the most significant
/// bits of a basis index, so `|a, b⟩` has index `a · 2^|b| + b`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegisterLayout {
    registers: Vec<Register>,
}

/// Where a register sits inside a basis index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RegisterSpan {
    pub shift: usize,
    pub width: usize,
}

impl RegisterSpan {
    #[inline]
    pub fn mask(&self) -> usize {
        ((1usize << self.width) - 1) << self.shift
    }

    #[inline]
    pub fn get(&self, index: usize) -> u64 {
        ((index >> self.shift) & ((1usize << self.width) - 1)) as u64
    }

    #[inline]
    pub fn set(&self, index: usize, value: u64) -> usize {
        (index & !self.mask()) | ((value as usize) << self.shift)
    }
}

impl RegisterLayout {
    pub fn new<S: Into<String>>(registers: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let mut out: Vec<Register> = Vec::new();
        for (name, qubits) in registers {
            let name = name.into();
            if out.iter().any(|r| r.name == name) {
                return Err(Error::DuplicateRegister(name));
            }
            out.push(Register { name, qubits });
        }
        let layout = Self { registers: out };
        if layout.total_qubits() > 62 {
            return Err(Error::Resource {
                what: "register layout (qubits)",
                requested: layout.total_qubits(),
                cap: 62,
            });
        }
        Ok(layout)
    }

    pub fn single(name: &str, qubits: usize) -> Self {
        Self {
            registers: vec![Register {
                name: name.to_string(),
                qubits,
            }],
        }
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn total_qubits(&self) -> usize {
        self.registers.iter().map(|r| r.qubits).sum()
    }

    pub fn dim(&self) -> usize {
        1usize << self.total_qubits()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.registers.iter().any(|r| r.name == name)
    }

    pub fn width(&self, name: &str) -> Result<usize> {
        Ok(self.span(name)?.width)
    }

    pub fn span(&self, name: &str) -> Result<RegisterSpan> {
        let mut shift = self.total_qubits();
        for r in &self.registers {
            shift -= r.qubits;
            if r.name == name {
                return Ok(RegisterSpan {
                    shift,
                    width: r.qubits,
                });
            }
        }
        Err(Error::UnknownRegister(name.to_string()))
    }

    /// Concatenation; names must stay unique.
    pub fn concat(&self, other: &RegisterLayout) -> Result<RegisterLayout> {
        RegisterLayout::new(
            self.registers
                .iter()
                .chain(other.registers.iter())
                .map(|r| (r.name.clone(), r.qubits)),
        )
    }

    /// Sub-layout of the named registers, kept in this layout's order.
    pub fn restrict(&self, keep: &[&str]) -> Result<RegisterLayout> {
        for k in keep {
            if !self.contains(k) {
                return Err(Error::UnknownRegister(k.to_string()));
            }
        }
        Ok(RegisterLayout {
            registers: self
                .registers
                .iter()
                .filter(|r| keep.contains(&r.name.as_str()))
                .cloned()
                .collect(),
        })
    }

    pub fn without(&self, drop: &[&str]) -> Result<RegisterLayout> {
        for d in drop {
            if !self.contains(d) {
                return Err(Error::UnknownRegister(d.to_string()));
            }
        }
        Ok(RegisterLayout {
            registers: self
                .registers
                .iter()
                .filter(|r| !drop.contains(&r.name.as_str()))
                .cloned()
                .collect(),
        })
    }

    pub fn names(&self) -> Vec<&str> {
        self.registers.iter().map(|r| r.name.as_str()).collect()
    }

    /// A register name not yet used, derived from `base`.
    pub fn fresh_name(&self, base: &str) -> String {
        if !self.contains(base) {
            return base.to_string();
        }
        (1..)
            .map(|i| format!("{base}_{i}"))
            .find(|n| !self.contains(n))
            .expect("unbounded search")
    }
}

/// Scatter table mapping a local index over several registers (first listed
/// register most significant) to the bits it occupies in a global index.
#[derive(Clone, Debug)]
pub(crate) struct LocalMap {
    pub offsets: Vec<usize>,
    pub mask: usize,
}

impl LocalMap {
    pub fn new(layout: &RegisterLayout, regs: &[&str]) -> Result<Self> {
        let mut spans = Vec::with_capacity(regs.len());
        for (i, r) in regs.iter().enumerate() {
            if regs[..i].contains(r) {
                return Err(Error::DuplicateRegister(r.to_string()));
            }
            spans.push(layout.span(r)?);
        }
        let local_bits: usize = spans.iter().map(|s| s.width).sum();
        let mask = spans.iter().fold(0usize, |m, s| m | s.mask());
        let offsets = (0..(1usize << local_bits))
            .map(|l| {
                let mut shift = local_bits;
                let mut g = 0usize;
                for s in &spans {
                    shift -= s.width;
                    let part = (l >> shift) & ((1usize << s.width) - 1);
                    g |= part << s.shift;
                }
                g
            })
            .collect();
        Ok(Self { offsets, mask })
    }

    pub fn local_dim(&self) -> usize {
        self.offsets.len()
    }

    /// Local index of a global basis index.
    #[cfg(test)]
    pub fn local_of(&self, global: usize) -> usize {
        // offsets[1 << b] is the global position of local bit b.
        let mut l = 0usize;
        let mut bit = 0usize;
        while (1usize << bit) < self.offsets.len() {
            if global & self.offsets[1usize << bit] != 0 {
                l |= 1 << bit;
            }
            bit += 1;
        }
        l
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spans_are_big_endian() {
        let l = RegisterLayout::new([("a", 2), ("b", 3)]).unwrap();
        assert_eq!(l.span("a").unwrap(), RegisterSpan { shift: 3, width: 2 });
        assert_eq!(l.span("b").unwrap(), RegisterSpan { shift: 0, width: 3 });
        assert!(matches!(l.span("c"), Err(Error::UnknownRegister(_))));
        assert!(RegisterLayout::new([("a", 1), ("a", 1)]).is_err());
    }

    #[test]
    fn local_map_round_trip() {
        let l = RegisterLayout::new([("a", 2), ("b", 1), ("c", 2)]).unwrap();
        let m = LocalMap::new(&l, &["c", "a"]).unwrap();
        assert_eq!(m.local_dim(), 16);
        for loc in 0..16 {
            assert_eq!(m.local_of(m.offsets[loc]), loc);
        }
        // c = 0b01, a = 0b10 -> local 0b0110.
        let g = (0b10 << 3) | 0b01;
        assert_eq!(m.local_of(g), 0b0110);
    }
}
