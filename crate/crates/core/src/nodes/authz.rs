use super::proto::{AUTH_ISSUED, AUTH_REQUEST, INDEX_REQUEST, INDEX_SNAPSHOT};
use super::{NodeContext, NodeDescriptor, NodeError, NodeRole};
use crate::mst::{AuthRequest, Issuer};
use crate::suite::SigKeyPair;

/// Issues session tokens for the attributes in its responsibility A_j.
#[derive(Debug, Clone)]
pub struct AuthorizationNode {
    descriptor: NodeDescriptor,
}

impl AuthorizationNode {
    pub fn new(descriptor: NodeDescriptor) -> Result<Self, NodeError> {
        if descriptor.role != NodeRole::Authorization || descriptor.signing.is_none() {
            return Err(NodeError::Invalid(format!("{:?} is not an authorization node descriptor", descriptor.id)));
        }
        Ok(Self { descriptor })
    }

    pub fn id(&self) -> &str {
        &self.descriptor.id
    }

    pub fn descriptor(&self) -> &NodeDescriptor {
        &self.descriptor
    }

    pub fn signing(&self) -> &SigKeyPair {
        self.descriptor.signing.as_ref().expect("checked in new")
    }

    pub fn handle(&self, ctx: &mut NodeContext<'_>, kind: u8, body: &[u8]) -> Result<(u8, Vec<u8>), NodeError> {
        match kind {
            AUTH_REQUEST => {
                let req = AuthRequest::from_bytes(body)?;
                let issuer = Issuer {
                    abe: ctx.abe,
                    pk: ctx.index.pk(),
                    suite: ctx.suite,
                    signing: self.signing(),
                    responsibility: &self.descriptor.responsibility,
                    params: ctx.index.params(),
                };
                let issued = issuer.issue(&req, ctx.now, ctx.rng)?;
                Ok((AUTH_ISSUED, issued.to_bytes()))
            }
            INDEX_REQUEST => Ok((INDEX_SNAPSHOT, ctx.index.to_json().into_bytes())),
            other => Err(NodeError::Unsupported(other)),
        }
    }
}
