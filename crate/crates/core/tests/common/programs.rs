//! Generators for structurally valid sequence programs.

use ghzion::seqlang::{DispTarget, FrameDecl, Header, IonRef, SequenceProgram, Step, TrapOverrides};
use ghzion::Mode;
use proptest::prelude::*;

pub fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6..1e6f64,
        Just(0.0),
        Just(0.1),
        Just(1e-300),
        Just(-2.5e200),
        any::<f64>().prop_filter("finite", |x| x.is_finite()),
    ]
}

pub fn non_negative() -> impl Strategy<Value = f64> {
    finite().prop_map(f64::abs)
}

pub fn ion_ref() -> impl Strategy<Value = IonRef> {
    prop_oneof![Just(IonRef::Last), (1usize..=6).prop_map(IonRef::Index)]
}

pub fn mode() -> impl Strategy<Value = Mode> {
    prop_oneof![Just(Mode::Ideal), Just(Mode::Physical)]
}

pub fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        (ion_ref(), finite()).prop_map(|(ion, phase)| Step::CarrierPiHalf { ion, phase }),
        (ion_ref(), 0usize..3, mode()).prop_map(|(ion, n, mode)| Step::JcPi { ion, n, mode }),
        (prop_oneof![Just(DispTarget::All), ion_ref().prop_map(DispTarget::Ion)], 1usize..4, mode())
            .prop_map(|(target, n, mode)| Step::DispPi { target, n, mode }),
        non_negative().prop_map(|duration| Step::Wait { duration }),
    ]
}

pub fn header() -> impl Strategy<Value = Header> {
    let trap = (
        proptest::option::of(non_negative()),
        proptest::option::of(non_negative()),
        proptest::option::of(non_negative()),
        proptest::option::of(4usize..8),
    )
        .prop_filter("at least one key", |t| t.0.is_some() || t.1.is_some() || t.2.is_some() || t.3.is_some())
        .prop_map(|(nu, eta, rabi, nmax)| TrapOverrides { nu, eta, rabi, nmax });
    let frame = prop_oneof![Just(FrameDecl::R), finite().prop_map(|delta| FrameDecl::RPrime { delta })];
    (
        proptest::option::of(6usize..=8),
        proptest::option::of(trap),
        proptest::option::of(frame),
    )
        .prop_map(|(ions, trap, frame)| Header { ions, trap, frame })
}

pub fn program() -> impl Strategy<Value = SequenceProgram> {
    (header(), proptest::collection::vec(step(), 0..12))
        .prop_map(|(h, steps)| SequenceProgram::new(h, steps))
}
