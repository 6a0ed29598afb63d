use std::path::PathBuf;

use thiserror::Error;

use crate::state::RegisterId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the simulator, its oracles and the solver pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("register name `{0}` is already in use")]
    DuplicateName(String),
    #[error("register width {0} is outside 1..=64")]
    WidthOutOfRange(u32),
    #[error("register table is full ({0} slots)")]
    CapacityExceeded(usize),
    #[error("register {0:?} is not active")]
    NotActive(RegisterId),
    #[error("unknown register `{0}`")]
    UnknownRegister(String),
    #[error("register {0:?} holds a nonzero value in some branch")]
    NonZeroContent(RegisterId),
    #[error("state has {0} qubits, dense export is limited to {max}", max = crate::state::MAX_DENSE_QUBITS)]
    TooManyQubits(u32),
    #[error("invalid target: bit {bit} of register {reg:?} (width {width})")]
    InvalidTarget { reg: RegisterId, bit: u32, width: u32 },
    #[error("invalid control on register {0:?}")]
    InvalidControl(RegisterId),
    #[error("phase factor has modulus {0}, expected 1")]
    NonUnitPhase(f64),
    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),
    #[error("multiplier {0} is even and has no inverse modulo 2^w")]
    EvenMultiplier(u64),
    #[error("source and destination register are the same ({0:?})")]
    AliasedRegisters(RegisterId),
    #[error("register widths differ: {0} vs {1}")]
    WidthMismatch(u32, u32),
    #[error("state norm is {0}, expected 1")]
    UnnormalizedState(f64),
    #[error("invalid amplitude vector: {0}")]
    InvalidAmplitudes(String),

    #[error("timing too noisy: stddev/mean = {0:.3}")]
    TimingTooNoisy(f64),
    #[error("invalid execution config: {0}")]
    InvalidConfig(String),

    #[error("failed to parse {path}: {msg}")]
    ParseError { path: PathBuf, msg: String },
    #[error("invalid memory: {0}")]
    InvalidMemory(String),
    #[error("memory entry {index} = {value} does not fit in {word_width} bits")]
    EntryOutOfRange { index: usize, value: u64, word_width: u32 },
    #[error("io error on {path}: {msg}")]
    Io { path: PathBuf, msg: String },

    #[error("unsupported dimension n = {0}")]
    BadDimension(u32),
    #[error("condition number must exceed 1, got {0}")]
    BadConditionNumber(f64),
    #[error("column {0} of the matrix is zero")]
    ZeroColumn(usize),
    #[error("target register is not |0> in every branch")]
    TargetNotZero,
    #[error("ancilla register is not |0> in every branch")]
    AncillaNotZero,
    #[error("projection onto the ancilla-zero subspace has norm {0:e}")]
    ZeroProjection(f64),
    #[error("schedule value {0} is outside [0, 1]")]
    BadScheduleValue(f64),
    #[error("singular linear system")]
    Singular,

    #[error(transparent)]
    Qasm(#[from] crate::qasm::QasmError),
}
