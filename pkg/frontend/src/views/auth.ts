import { ApiError, type ApiClient, type LoginResult } from "../api.js";
import { clear, el, fieldError } from "../dom.js";

// register -> OTP entry -> verify -> login, plus a plain sign-in card for
// returning users. Server error codes land on the field they belong to.

export function authView(api: ApiClient, onLogin: (result: LoginResult) => void): HTMLElement {
  const root = el("div", { class: "auth", id: "auth" });

  const loginEmail = el("input", { id: "login-email", type: "email", autocomplete: "username" });
  const loginPassword = el("input", { id: "login-password", type: "password" });
  const loginError = el("p", { class: "error", id: "login-error" });
  const loginForm = el(
    "form",
    { id: "login-form" },
    el("h2", {}, "Sign in"),
    el("label", {}, "College email", loginEmail),
    el("label", {}, "Password", loginPassword),
    loginError,
    el("button", { type: "submit" }, "Sign in"),
  );
  loginForm.addEventListener("submit", async (event) => {
    event.preventDefault();
    fieldError(loginError, null);
    try {
      onLogin(await api.login(loginEmail.value, loginPassword.value));
    } catch (error) {
      fieldError(loginError, messageOf(error));
    }
  });

  const name = el("input", { id: "reg-name" });
  const email = el("input", { id: "reg-email", type: "email" });
  const phone = el("input", { id: "reg-phone" });
  const collegeId = el("input", { id: "reg-college-id" });
  const password = el("input", { id: "reg-password", type: "password" });
  const emailError = el("p", { class: "error", id: "reg-email-error" });
  const passwordError = el("p", { class: "error", id: "reg-password-error" });
  const formError = el("p", { class: "error", id: "reg-error" });
  const registerForm = el(
    "form",
    { id: "register-form" },
    el("h2", {}, "Create account"),
    el("label", {}, "Name", name),
    el("label", {}, "College email", email, emailError),
    el("label", {}, "Phone", phone),
    el("label", {}, "College ID", collegeId),
    el("label", {}, "Password", password, passwordError),
    formError,
    el("button", { type: "submit" }, "Register"),
  );

  const otpStep = el("div", { id: "otp-step", hidden: "hidden" });

  registerForm.addEventListener("submit", async (event) => {
    event.preventDefault();
    fieldError(emailError, null);
    fieldError(passwordError, null);
    fieldError(formError, null);
    try {
      const receipt = await api.register({
        name: name.value,
        email: email.value,
        phone: phone.value,
        collegeId: collegeId.value,
        password: password.value,
      });
      showOtpStep(receipt.email, password.value);
    } catch (error) {
      if (error instanceof ApiError && error.code === "domain_not_allowed") {
        fieldError(emailError, error.message);
      } else if (error instanceof ApiError && error.code === "weak_password") {
        fieldError(passwordError, error.message);
      } else {
        fieldError(formError, messageOf(error));
      }
    }
  });

  function showOtpStep(forEmail: string, withPassword: string): void {
    registerForm.hidden = true;
    otpStep.hidden = false;
    clear(otpStep);
    const code = el("input", { id: "otp-code", inputmode: "numeric", maxlength: "6" });
    const otpError = el("p", { class: "error", id: "otp-error" });
    const form = el(
      "form",
      { id: "otp-form" },
      el("h2", {}, "Check your email"),
      el("p", {}, `We sent a 6-digit code to ${forEmail}.`),
      el("label", {}, "Code", code, otpError),
      el("button", { type: "submit" }, "Verify"),
    );
    form.addEventListener("submit", async (event) => {
      event.preventDefault();
      fieldError(otpError, null);
      try {
        await api.verifyOtp(forEmail, code.value);
        // account exists now; complete the flow in one go
        onLogin(await api.login(forEmail, withPassword));
      } catch (error) {
        fieldError(otpError, messageOf(error));
      }
    });
    otpStep.append(form);
  }

  root.append(loginForm, registerForm, otpStep);
  return root;
}

function messageOf(error: unknown): string {
  if (error instanceof ApiError) return error.message;
  return error instanceof Error ? error.message : String(error);
}
