//! Conditioning signals for the restoration network: a global quality
//! embedding, a semantic mask set, and content/degradation embeddings.
//!
//! Each signal comes from a provider. Stub providers are deterministic
//! functions of the image; file providers read precomputed artifacts keyed by
//! image id (see [`artifact`] for the byte layout).

pub mod artifact;
pub mod clip;
pub mod masks;
pub mod quality;
mod stats;

use std::path::Path;

pub use clip::{clip_embed_file, clip_embed_stub, ClipEmbeddings, CLIP_DIM};
pub use masks::{downsample_labels, mask_dropout, semantic_masks_stub, BackgroundPolicy, MaskStubMode, SemanticMaskSet};
pub use quality::{
    adapt_quality, adapt_quality_on_graph, quality_embed_file, quality_embed_stub, EmbeddingSource, QualityAdapter,
    QualityEmbedding, QualityQuery,
};

use crate::config::{MaskMode, ModelConfig};
use crate::error::Result;
use crate::image::{CropGeometry, ImageTensor};
use artifact::{EmbeddingFile, MaskFile};

pub trait QualityProvider {
    fn quality(&self, id: &str, query: &QualityQuery) -> Result<QualityEmbedding>;
}

pub trait MaskProvider {
    fn masks(&self, id: &str, image: &ImageTensor) -> Result<SemanticMaskSet>;
}

pub trait ClipProvider {
    fn clip(&self, id: &str, image: &ImageTensor) -> Result<ClipEmbeddings>;
}

pub struct StubQuality {
    pub dim: usize,
}

impl QualityProvider for StubQuality {
    fn quality(&self, _id: &str, query: &QualityQuery) -> Result<QualityEmbedding> {
        Ok(quality_embed_stub(query, self.dim))
    }
}

pub struct StubMasks {
    pub mode: MaskStubMode,
    pub cells: usize,
}

impl MaskProvider for StubMasks {
    fn masks(&self, _id: &str, image: &ImageTensor) -> Result<SemanticMaskSet> {
        semantic_masks_stub(image, self.mode, self.cells)
    }
}

pub struct StubClip;

impl ClipProvider for StubClip {
    fn clip(&self, _id: &str, image: &ImageTensor) -> Result<ClipEmbeddings> {
        Ok(clip_embed_stub(image))
    }
}

pub struct FileQuality {
    file: EmbeddingFile,
    dim: usize,
}

impl FileQuality {
    pub fn load(path: &Path, dim: usize) -> Result<Self> {
        Ok(FileQuality {
            file: EmbeddingFile::load(path)?,
            dim,
        })
    }
}

impl QualityProvider for FileQuality {
    fn quality(&self, id: &str, _query: &QualityQuery) -> Result<QualityEmbedding> {
        quality::quality_from_artifact(&self.file, id, self.dim)
    }
}

pub struct FileMasks {
    file: MaskFile,
}

impl FileMasks {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(FileMasks {
            file: MaskFile::load(path)?,
        })
    }
}

impl MaskProvider for FileMasks {
    fn masks(&self, id: &str, image: &ImageTensor) -> Result<SemanticMaskSet> {
        let ms = self
            .file
            .get(id)
            .ok_or_else(|| crate::Error::Provider(format!("no masks for image id `{id}`")))?;
        if ms.height() != image.height() || ms.width() != image.width() {
            return Err(crate::Error::Validation(format!(
                "masks for `{id}` are {}x{}, image is {}x{}",
                ms.height(),
                ms.width(),
                image.height(),
                image.width()
            )));
        }
        Ok(ms.clone())
    }
}

pub struct FileClip {
    file: EmbeddingFile,
}

impl FileClip {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(FileClip {
            file: EmbeddingFile::load(path)?,
        })
    }
}

impl ClipProvider for FileClip {
    fn clip(&self, id: &str, _image: &ImageTensor) -> Result<ClipEmbeddings> {
        clip::clip_from_artifact(&self.file, id)
    }
}

/// One provider per signal.
pub struct Providers {
    pub quality: Box<dyn QualityProvider>,
    pub masks: Box<dyn MaskProvider>,
    pub clip: Box<dyn ClipProvider>,
}

impl Providers {
    pub fn stub(config: &ModelConfig) -> Self {
        let mode = match config.guidance.mask_mode {
            MaskMode::Grid => MaskStubMode::Grid,
            MaskMode::Quantile => MaskStubMode::Quantile,
        };
        Providers {
            quality: Box::new(StubQuality {
                dim: config.embed_dims.quality,
            }),
            masks: Box::new(StubMasks {
                mode,
                cells: config.guidance.mask_cells,
            }),
            clip: Box::new(StubClip),
        }
    }

    /// Stub providers, with any given artifact file taking over its signal.
    pub fn with_files(
        config: &ModelConfig,
        quality: Option<&Path>,
        masks: Option<&Path>,
        clip: Option<&Path>,
    ) -> Result<Self> {
        let mut p = Self::stub(config);
        if let Some(path) = quality {
            p.quality = Box::new(FileQuality::load(path, config.embed_dims.quality)?);
        }
        if let Some(path) = masks {
            p.masks = Box::new(FileMasks::load(path)?);
        }
        if let Some(path) = clip {
            p.clip = Box::new(FileClip::load(path)?);
        }
        Ok(p)
    }
}

/// Guidance for one image. A signal is `None` when its component is disabled.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GuidanceBundle {
    pub quality: Option<QualityEmbedding>,
    pub masks: Option<SemanticMaskSet>,
    pub clip: Option<ClipEmbeddings>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Queries providers for the signals a configuration needs and adapts them
/// to crops. Mask dropout runs only in [`Mode::Train`].
pub struct GuidanceAssembler<'a> {
    providers: &'a Providers,
    config: &'a ModelConfig,
}

impl<'a> GuidanceAssembler<'a> {
    pub fn new(providers: &'a Providers, config: &'a ModelConfig) -> Self {
        GuidanceAssembler { providers, config }
    }

    /// Signals for a full source image.
    pub fn source(&self, id: &str, image: &ImageTensor) -> Result<GuidanceBundle> {
        let c = &self.config.components;
        let quality = if c.iqa {
            let q = QualityQuery::new(image.clone(), self.config.guidance.quality_prompt.clone())?;
            Some(self.providers.quality.quality(id, &q)?)
        } else {
            None
        };
        let masks = if c.sgu {
            Some(self.providers.masks.masks(id, image)?)
        } else {
            None
        };
        let clip = if c.ti {
            Some(self.providers.clip.clip(id, image)?)
        } else {
            None
        };
        Ok(GuidanceBundle { quality, masks, clip })
    }

    /// Signals for a crop of a source image: masks follow the crop geometry,
    /// then (in training) go through mask dropout.
    pub fn for_crop(&self, source: &GuidanceBundle, geometry: &CropGeometry, mode: Mode, seed: u64) -> Result<GuidanceBundle> {
        let masks = match &source.masks {
            Some(ms) => {
                let cropped = ms.transformed(geometry);
                Some(match mode {
                    Mode::Train => mask_dropout(&cropped, self.config.guidance.mask_dropout_rate, seed)?,
                    Mode::Eval => cropped,
                })
            }
            None => None,
        };
        Ok(GuidanceBundle {
            quality: source.quality.clone(),
            masks,
            clip: source.clip.clone(),
        })
    }

    pub fn assemble(&self, id: &str, image: &ImageTensor, mode: Mode, seed: u64) -> Result<GuidanceBundle> {
        let source = self.source(id, image)?;
        self.for_crop(&source, &CropGeometry::identity(image.height(), image.width()), mode, seed)
    }
}
