use crate::error::Result;
use crate::generator::conv::conv1d;
use crate::generator::model::GeneratorModel;
use crate::generator::spectra::FragmentSynth;
use crate::generator::OpCount;
use crate::linalg::Matrix;
use crate::pulse::pulses_from_f0;
use crate::transport::{OlaOp, ResampleOp};
use crate::types::{FeatureTrack, Waveform, FEATURE_DIM};

/// Whole-utterance synthesis. The output always has `T * S` samples.
pub fn synthesize(model: &GeneratorModel, features: &FeatureTrack) -> Result<Waveform> {
    synthesize_counted(model, features, &mut OpCount::default())
}

/// [`synthesize`] with multiply-adds accumulated into `ops`.
pub fn synthesize_counted(model: &GeneratorModel, features: &FeatureTrack, ops: &mut OpCount) -> Result<Waveform> {
    features.validate()?;
    let slope = model.leaky_slope();
    let n_frames = features.len();

    let mut h = Matrix::zeros(n_frames, FEATURE_DIM);
    for (t, frame) in features.frames().iter().enumerate() {
        model.scale_frame(frame, h.row_mut(t))?;
    }
    for layer in model.frame_layers() {
        h = conv1d(&h, layer, Some(slope), ops)?;
    }

    let pulses = pulses_from_f0(features)?;
    let resample = ResampleOp::new(pulses.positions(), features.frame_shift(), n_frames)?;
    let hp = resample.apply(&h)?;
    let hp = conv1d(&hp, model.pulse_layer(), Some(slope), ops)?;

    let fft_len = model.fft_len();
    let bins = model.bins();
    let ola = OlaOp::from_centers(pulses.positions(), features.total_samples(), fft_len)?;
    let mut synth = FragmentSynth::new(fft_len)?;
    let mut spectrum = vec![0.0; model.out_channels()];
    let mut fragments = vec![0.0; pulses.len() * fft_len];
    for (p, frag) in fragments.chunks_exact_mut(fft_len).enumerate() {
        model.projection().apply_row(hp.row(p), &mut spectrum, ops);
        synth.fragment(&spectrum[..bins], &spectrum[bins..], frag)?;
    }
    let samples = ola.apply(&fragments)?;
    Ok(Waveform::new(samples, features.sample_rate()))
}
