// Typed client for the marketplace HTTP API. Every shape here mirrors the
// server's wire format field for field; the UI renders these values verbatim
// and never recomputes them.

export interface RegisterInput {
  name: string;
  email: string;
  phone: string;
  collegeId: string;
  password: string;
}

export interface RegisterReceipt {
  email: string;
  otpTtlSeconds: number;
}

export interface VerifiedAccount {
  userId: string;
  name: string;
  email: string;
}

export interface Profile {
  id: string;
  name: string;
  email: string;
  creditedPoints: number;
}

export interface LoginResult {
  token: string;
  expiresAt: number;
  profile: Profile;
}

export interface Category {
  id: string;
  name: string;
}

export interface ListingSummary {
  id: string;
  name: string;
  price: number;
  category: string;
  sellerName: string;
  sellerPoints: number;
  createdAt: number;
}

export interface ListingDetail {
  id: string;
  name: string;
  description: string;
  price: number;
  category: string;
  categoryId: string;
  quantity: number;
  shipping: string;
  status: string;
  priceAward: string;
  idealPrice: number | null;
  sellerId: string;
  sellerName: string;
  sellerPoints: number;
  hasPhoto: boolean;
  createdAt: number;
  updatedAt: number;
}

export interface PartyContact {
  name: string;
  email: string;
  phone: string;
}

export interface RequestRecord {
  id: string;
  productId: string;
  buyerId: string;
  sellerId: string;
  state: string;
  createdAt: number;
  resolvedAt: number | null;
}

export interface ContactExchange {
  buyer: PartyContact;
  seller: PartyContact;
}

export interface RequestReceipt {
  request: RequestRecord;
  contact: ContactExchange;
}

export interface ProductRef {
  id: string;
  name: string;
  price: number;
}

export interface RequestView {
  request: RequestRecord;
  product: ProductRef;
}

export interface PromptEntry {
  request: RequestRecord;
  product: ProductRef;
  buyer: PartyContact;
}

export interface PendingBucket {
  listingId: string;
  modifiers: { kind: string; magnitude: number }[];
}

export interface ReputationView {
  userId: string;
  credited: number;
  boost: number;
  pending: PendingBucket[];
}

export interface SearchParams {
  q?: string;
  category?: string;
  minPrice?: number;
  maxPrice?: number;
  limit?: number;
  offset?: number;
}

export interface NewListing {
  name: string;
  description: string;
  price: number;
  categoryId: string;
  quantity?: number;
  shipping?: string;
  photo?: { bytes: Uint8Array; type: string; filename: string };
}

export type ResolveOutcome = "sold" | "pending" | "declined";

/** Server error envelope, thrown for any non-2xx response. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

interface CallOptions {
  method?: string;
  body?: BodyInit;
  contentType?: string;
  auth?: boolean;
  query?: Record<string, string | number | undefined>;
}

export class ApiClient {
  // token lives only in this field; nothing here touches any storage API
  private token: string | null = null;

  constructor(readonly baseUrl: string = "") {}

  setToken(token: string | null): void {
    this.token = token;
  }

  hasToken(): boolean {
    return this.token !== null;
  }

  private async call<T>(path: string, options: CallOptions = {}): Promise<T> {
    const headers: Record<string, string> = {};
    if (options.auth !== false) {
      if (this.token === null) {
        throw new ApiError(0, "no_session", "not logged in");
      }
      headers["Authorization"] = `Bearer ${this.token}`;
    }
    if (options.contentType) {
      headers["Content-Type"] = options.contentType;
    }
    let url = this.baseUrl + path;
    if (options.query) {
      const params = new URLSearchParams();
      for (const [key, value] of Object.entries(options.query)) {
        if (value !== undefined && value !== "") params.set(key, String(value));
      }
      const encoded = params.toString();
      if (encoded) url += `?${encoded}`;
    }
    const response = await fetch(url, {
      method: options.method ?? "GET",
      headers,
      body: options.body,
    });
    if (response.status === 204) {
      return undefined as T;
    }
    if (!response.ok) {
      let code = "unknown";
      let message = `HTTP ${response.status}`;
      try {
        const envelope = await response.json();
        if (envelope && typeof envelope.code === "string") {
          code = envelope.code;
          message = envelope.message ?? message;
        }
      } catch {
        // non-JSON error body; keep the fallback
      }
      throw new ApiError(response.status, code, message);
    }
    return (await response.json()) as T;
  }

  private json(payload: unknown): CallOptions {
    return {
      method: "POST",
      body: JSON.stringify(payload),
      contentType: "application/json",
    };
  }

  // --- auth (public) ---

  register(input: RegisterInput): Promise<RegisterReceipt> {
    return this.call("/auth/register", { ...this.json(input), auth: false });
  }

  verifyOtp(email: string, code: string): Promise<VerifiedAccount> {
    return this.call("/auth/verify-otp", { ...this.json({ email, code }), auth: false });
  }

  async login(email: string, password: string): Promise<LoginResult> {
    const result = await this.call<LoginResult>("/auth/login", {
      ...this.json({ email, password }),
      auth: false,
    });
    this.token = result.token;
    return result;
  }

  logout(): void {
    this.token = null;
  }

  // --- catalog ---

  categories(): Promise<Category[]> {
    return this.call("/categories");
  }

  search(params: SearchParams = {}): Promise<ListingSummary[]> {
    return this.call("/products", {
      query: {
        q: params.q,
        category: params.category,
        min_price: params.minPrice,
        max_price: params.maxPrice,
        limit: params.limit,
        offset: params.offset,
      },
    });
  }

  product(id: string): Promise<ListingDetail> {
    return this.call(`/products/${encodeURIComponent(id)}`);
  }

  createListing(input: NewListing): Promise<ListingDetail> {
    const { body, contentType } = encodeMultipart(input);
    return this.call("/products", { method: "POST", body, contentType });
  }

  deleteListing(id: string): Promise<void> {
    return this.call(`/products/${encodeURIComponent(id)}`, { method: "DELETE" });
  }

  photoUrl(id: string): string {
    return `${this.baseUrl}/products/${encodeURIComponent(id)}/photo`;
  }

  // --- transactions ---

  requestProduct(id: string): Promise<RequestReceipt> {
    return this.call(`/products/${encodeURIComponent(id)}/request`, { method: "POST" });
  }

  resolveRequest(id: string, outcome: ResolveOutcome): Promise<RequestRecord> {
    return this.call(`/requests/${encodeURIComponent(id)}/resolve`, this.json({ outcome }));
  }

  myRequests(): Promise<RequestView[]> {
    return this.call("/me/requests");
  }

  myPrompts(): Promise<PromptEntry[]> {
    return this.call("/me/prompts");
  }

  myReputation(): Promise<ReputationView> {
    return this.call("/me/reputation");
  }

  health(): Promise<{ status: string; version: string }> {
    return this.call("/healthz", { auth: false });
  }
}

/** Hand-rolled multipart body: avoids FormData/fetch interop differences
 * between browsers, jsdom, and node, and gives byte-exact control. */
export function encodeMultipart(input: NewListing): {
  body: Uint8Array<ArrayBuffer>;
  contentType: string;
} {
  const boundary = `----market${Math.random().toString(36).slice(2)}${Date.now().toString(36)}`;
  const encoder = new TextEncoder();
  const chunks: Uint8Array[] = [];

  const field = (name: string, value: string) => {
    chunks.push(
      encoder.encode(
        `--${boundary}\r\nContent-Disposition: form-data; name="${name}"\r\n\r\n${value}\r\n`,
      ),
    );
  };

  field("name", input.name);
  field("description", input.description);
  field("price", String(input.price));
  field("categoryId", input.categoryId);
  if (input.quantity !== undefined) field("quantity", String(input.quantity));
  if (input.shipping !== undefined) field("shipping", input.shipping);
  if (input.photo) {
    const filename = input.photo.filename.replace(/"/g, "");
    chunks.push(
      encoder.encode(
        `--${boundary}\r\nContent-Disposition: form-data; name="photo"; filename="${filename}"\r\n` +
          `Content-Type: ${input.photo.type}\r\n\r\n`,
      ),
    );
    chunks.push(input.photo.bytes);
    chunks.push(encoder.encode("\r\n"));
  }
  chunks.push(encoder.encode(`--${boundary}--\r\n`));

  let size = 0;
  for (const chunk of chunks) size += chunk.length;
  const body = new Uint8Array(new ArrayBuffer(size));
  let at = 0;
  for (const chunk of chunks) {
    body.set(chunk, at);
    at += chunk.length;
  }
  return { body, contentType: `multipart/form-data; boundary=${boundary}` };
}
